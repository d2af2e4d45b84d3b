"""Reading and writing the JSON document formats: scenarios, masks, study
configurations, and offline trial-state files.

A scenario document carries the grid, the default admissible subset, the true
toxicity matrix (row-major: one row per drug-A level), the designated target
combinations, and the acceptable-toxicity interval. Mask documents carry just
the admissible index pairs. Bundled documents under `comboin/data` can be
referred to by bare name wherever a path is accepted.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .core import DesignParams, DoseGrid, Scenario, SubsetMask


def _data_root():
    return resources.files("comboin") / "data"


def list_bundled(kind: str) -> list[str]:
    """Names of bundled documents; kind is 'scenarios', 'masks', or 'studies'."""
    folder = _data_root() / kind
    return sorted(p.name.removesuffix(".json") for p in folder.iterdir() if p.name.endswith(".json"))


def _read_document(path_or_name: str | Path, kind: str) -> dict:
    p = Path(path_or_name)
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    candidate = _data_root() / kind / f"{path_or_name}.json"
    if candidate.is_file():
        return json.loads(candidate.read_text())
    if p.exists():
        return json.loads(p.read_text())
    raise FileNotFoundError(
        f"no such file, and no bundled {kind[:-1]} named {path_or_name!r} "
        f"(available: {', '.join(list_bundled(kind))})"
    )


def scenario_from_dict(doc: dict) -> tuple[DoseGrid, SubsetMask, Scenario]:
    grid = DoseGrid(tuple(doc["levels_a"]), tuple(doc["levels_b"]))
    mask_cells = doc.get("mask")
    if mask_cells is None:
        mask = SubsetMask.full(grid)
    else:
        mask = SubsetMask.from_cells(grid, [tuple(c) for c in mask_cells])
    tox = np.asarray(doc["true_tox"], dtype=float)
    if tox.shape != grid.shape:
        raise ValueError(f"true_tox shape {tox.shape} does not match grid {grid.shape}")
    lo, hi = doc.get("acceptable", (0.16, 0.33))
    scenario = Scenario(
        name=doc.get("name", "scenario"),
        true_tox=tox,
        mtc_set=frozenset(tuple(c) for c in doc.get("mtc", [])),
        acceptable_lo=float(lo),
        acceptable_hi=float(hi),
    )
    return grid, mask, scenario


def load_scenario(path_or_name: str | Path) -> tuple[DoseGrid, SubsetMask, Scenario]:
    return scenario_from_dict(_read_document(path_or_name, "scenarios"))


def load_mask(path_or_name: str | Path, grid: DoseGrid) -> SubsetMask:
    doc = _read_document(path_or_name, "masks")
    return SubsetMask.from_cells(grid, [tuple(c) for c in doc["mask"]])


def load_study_config(path_or_name: str | Path) -> dict:
    return _read_document(path_or_name, "studies")


def params_from_dict(doc: dict) -> DesignParams:
    """Build DesignParams from a JSON object, deriving thresholds as needed."""
    known = {
        "phi", "phi1", "phi2", "lambda_e", "lambda_d", "epsilon", "cohort_size",
        "max_cohorts", "earlystop_n", "design", "prior_a", "prior_b",
        "require_mtc_below_lambda_d", "mtc_tie_rule", "min_n_eliminate",
        "cb_surface",
    }
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown design parameter(s): {sorted(unknown)}")
    kw = dict(doc)
    phi = kw.pop("phi")
    return DesignParams.from_target(phi, kw.pop("phi1", None), kw.pop("phi2", None), **kw)


def params_to_dict(params: DesignParams) -> dict:
    return {
        "phi": params.phi,
        "phi1": params.phi1,
        "phi2": params.phi2,
        "lambda_e": params.lambda_e,
        "lambda_d": params.lambda_d,
        "epsilon": params.epsilon,
        "cohort_size": params.cohort_size,
        "max_cohorts": params.max_cohorts,
        "earlystop_n": params.earlystop_n,
        "design": params.design.value,
        "prior_a": params.prior_a,
        "prior_b": params.prior_b,
        "require_mtc_below_lambda_d": params.require_mtc_below_lambda_d,
        "mtc_tie_rule": params.mtc_tie_rule,
        "min_n_eliminate": params.min_n_eliminate,
        "cb_surface": params.cb_surface,
    }


def load_trial_file(path: str | Path) -> dict:
    """Offline trial-state document: params, grid, mask, and dosing history."""
    doc = json.loads(Path(path).read_text())
    for key in ("params", "grid", "cohorts"):
        if key not in doc:
            raise ValueError(f"trial-state file missing {key!r}")
    return doc
