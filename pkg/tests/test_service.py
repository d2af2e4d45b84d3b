"""Conduct service: trial lifecycle over HTTP, audit replay, error paths."""

import json

import pytest
from fastapi.testclient import TestClient

from comboin.service import create_app

from .conftest import CASE_STUDY_CELLS

CASE_PAYLOAD = {
    "params": {"phi": 0.30, "epsilon": 0.90},
    "grid": {"levels_a": [15, 25, 50, 75], "levels_b": [120, 160, 200, 240]},
    "mask": [list(c) for c in CASE_STUDY_CELLS],
    "seed": 20240817,
}


@pytest.fixture
def client(tmp_path):
    return TestClient(create_app(tmp_path / "data"))


def force_branch_seed(client, payload, want, max_tries=40):
    """Create a trial whose recorded tie at (2,2) resolves to `want`."""
    for seed in range(max_tries):
        doc = dict(payload) | {"seed": 1000 + seed}
        trial = client.post("/trials", json=doc).json()
        tid = trial["trial_id"]
        for at in ([1, 1], [1, 2], [2, 2]):
            r = client.post(f"/trials/{tid}/cohorts", json={"at": at, "dlt": 0}).json()
        if r["decision"]["next"] == list(want):
            return tid
    raise AssertionError("no seed produced the requested branch")


def test_create_starts_at_the_lowest_combination(client):
    r = client.post("/trials", json=CASE_PAYLOAD)
    assert r.status_code == 201
    body = r.json()
    assert body["recommendation"] == [1, 1]
    assert body["status"] == "running"
    cell = next(c for c in body["cells"] if c["cell"] == [1, 1])
    assert cell["doses"] == [15, 120]


def test_create_rejects_bad_mask_and_params(client):
    bad_mask = dict(CASE_PAYLOAD) | {"mask": [[1, 2], [2, 2]]}
    r = client.post("/trials", json=bad_mask)
    assert r.status_code == 400
    assert r.json()["code"] == "invalid_trial"
    bad_params = dict(CASE_PAYLOAD) | {"params": {"phi": 0.3, "epsilon": 2.0}}
    assert client.post("/trials", json=bad_params).status_code == 400


def test_duplicate_creates_get_distinct_ids(client):
    a = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    b = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    assert a != b
    assert set(client.get("/trials").json()["trials"]) >= {a, b}


def test_case_study_sequence_through_the_api(client):
    tid = force_branch_seed(client, CASE_PAYLOAD, (2, 3))
    cohorts = [([2, 3], 1), ([2, 3], 0), ([3, 3], 1), ([3, 3], 0),
               ([3, 4], 1), ([3, 4], 1), ([3, 4], 1)]
    for at, dlt in cohorts:
        r = client.post(f"/trials/{tid}/cohorts", json={"at": at, "dlt": dlt})
        assert r.status_code == 200, r.text
        body = r.json()
    assert body["status"] == "stopped_converged"
    assert body["total_n"] == 30

    sel = client.get(f"/trials/{tid}/selection").json()
    assert sel["selection"] == [3, 4]
    assert sel["doses"] == [50, 240]

    # posting to a stopped trial fails cleanly
    r = client.post(f"/trials/{tid}/cohorts", json={"at": [3, 4], "dlt": 0})
    assert r.status_code == 409
    assert r.json()["code"] == "trial_stopped"


def test_wrong_combination_requires_override(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    r = client.post(f"/trials/{tid}/cohorts", json={"at": [1, 2], "dlt": 0})
    assert r.status_code == 409
    assert r.json()["code"] == "wrong_combination"
    r = client.post(
        f"/trials/{tid}/cohorts",
        json={"at": [1, 2], "dlt": 0, "override": True, "note": "already enrolled"},
    )
    assert r.status_code == 200


def test_safety_stop_surfaces_in_the_response(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    r = client.post(f"/trials/{tid}/cohorts", json={"at": [1, 1], "dlt": 3})
    body = r.json()
    assert body["status"] == "stopped_safety"
    assert body["decision"]["action"] == "stop"
    assert body["recommendation"] is None
    sel = client.get(f"/trials/{tid}/selection").json()
    assert sel["selection"] is None


def test_selection_and_what_if_guards(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    assert client.get(f"/trials/{tid}/selection").status_code == 409
    assert client.get("/trials/nope/selection").status_code == 404
    assert client.get(f"/trials/{tid}/what-if").status_code == 200
    client.post(f"/trials/{tid}/cohorts", json={"at": [1, 1], "dlt": 3})
    assert client.get(f"/trials/{tid}/what-if").status_code == 409


def test_cohort_validation(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    r = client.post(f"/trials/{tid}/cohorts", json={"at": [1, 1], "dlt": 4})
    assert r.status_code == 400
    r = client.post(f"/trials/{tid}/cohorts", json={"at": [1, 1]})
    assert r.status_code == 400


def test_decision_table_endpoint(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    table = client.get(f"/trials/{tid}/decision-table").json()
    assert table["lambda_e"] == pytest.approx(0.23649068523646799)
    assert table["lambda_d"] == pytest.approx(0.35851946464092984)
    rows = {r["n"]: r for r in table["rows"]}
    assert rows[9]["escalate_if_y_le"] == 2
    assert rows[9]["deescalate_if_y_ge"] == 4
    assert len(table["rows"]) == 45


def test_what_if_rows_match_the_decision_table(client):
    tid = client.post("/trials", json=CASE_PAYLOAD).json()["trial_id"]
    client.post(f"/trials/{tid}/cohorts", json={"at": [1, 1], "dlt": 0})
    client.post(f"/trials/{tid}/cohorts", json={"at": [1, 2], "dlt": 1})
    # now at (1,2) with 1/3; previewing the next cohort of 3
    table = {r["n"]: r for r in client.get(f"/trials/{tid}/decision-table").json()["rows"]}
    rows = client.get(f"/trials/{tid}/what-if").json()["rows"]
    assert [r["dlt"] for r in rows] == [0, 1, 2, 3]
    for row in rows:
        n, y = row["total_n"], row["total_dlt"]
        ref = table[n]
        if ref["eliminate_if_y_ge"] is not None and y >= ref["eliminate_if_y_ge"]:
            expected = "eliminate_and_move"
        elif y <= ref["escalate_if_y_le"]:
            expected = "escalate"
        elif y >= ref["deescalate_if_y_ge"]:
            expected = "deescalate"
        else:
            expected = "stay"
        assert row["action"] == expected, row


def test_what_if_preview_matches_the_actual_posting(client):
    tid = force_branch_seed(client, CASE_PAYLOAD, (2, 3))
    preview = client.get(f"/trials/{tid}/what-if").json()["rows"]
    actual = client.post(f"/trials/{tid}/cohorts", json={"at": [2, 3], "dlt": 1}).json()
    row = next(r for r in preview if r["dlt"] == 1)
    assert row["action"] == actual["decision"]["action"]
    assert row["next"] == actual["decision"]["next"]


def test_audit_replay_reproduces_state_after_restart(tmp_path):
    data_dir = tmp_path / "data"
    client = TestClient(create_app(data_dir))
    tid = force_branch_seed(client, CASE_PAYLOAD, (2, 3))
    client.post(f"/trials/{tid}/cohorts", json={"at": [2, 3], "dlt": 1})
    before = client.get(f"/trials/{tid}").json()

    fresh = TestClient(create_app(data_dir))  # new process-equivalent
    after = fresh.get(f"/trials/{tid}").json()
    assert after["cells"] == before["cells"]
    assert after["recommendation"] == before["recommendation"]
    assert after["events"] == before["events"]

    # tamper with a stored decision: replay must refuse
    path = data_dir / f"{tid}.json"
    doc = json.loads(path.read_text())
    doc["events"][-1]["decision"]["next"] = [1, 1]
    path.write_text(json.dumps(doc))
    tampered = TestClient(create_app(data_dir))
    assert tampered.get(f"/trials/{tid}").status_code == 500


def test_static_token_auth(tmp_path):
    client = TestClient(create_app(tmp_path / "d", token="sesame"))
    assert client.get("/trials").status_code == 401
    assert client.get("/trials", headers={"X-Auth-Token": "sesame"}).status_code == 200
