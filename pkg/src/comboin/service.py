"""Trial-conduct HTTP service: create a live trial, record real cohort
outcomes, and query recommendations, elimination status, and the final
selection.

Every trial is an append-only event log persisted as one JSON document. The
per-trial rng seed is fixed at creation and each decision is recorded with
the event, so replaying the log reproduces the stored state exactly; on load
the service re-runs every decision and verifies it against the recorded one.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import blrm
from .boundaries import decision_table
from .core import (
    Action,
    Cell,
    Decision,
    DesignParams,
    DesignVariant,
    DoseGrid,
    SubsetMask,
    TieBreak,
    TrialState,
    TrialStatus,
    mark_eliminated,
)
from .engine import apply_cohort, check_stop, decide_next
from .files import params_from_dict, params_to_dict
from .isotonic import fit_isotonic, select_mtc
from .simulator import CachingSurfaceProvider


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class LiveTrial:
    """One trial's full record plus its live rng stream and writer lock."""

    def __init__(self, trial_id: str, created_at: float, seed: int,
                 params: DesignParams, grid: DoseGrid, mask: SubsetMask):
        self.trial_id = trial_id
        self.created_at = created_at
        self.seed = seed
        self.params = params
        self.grid = grid
        self.mask = mask
        self.state = TrialState.initial(grid)
        self.events: list[dict] = []
        self.last_decision: Decision | None = None
        self.rng = np.random.default_rng(seed)
        self.lock = threading.Lock()
        self.surface_provider = CachingSurfaceProvider(
            blrm.BlrmPrior.default(), grid, mask, blrm.McmcConfig(), mode=params.cb_surface
        ) if params.design is DesignVariant.BOIN_CB else None

    @property
    def recommendation(self) -> Cell | None:
        if self.state.status is not TrialStatus.RUNNING:
            return None
        return self.state.current

    def decide(self, state: TrialState) -> Decision:
        return decide_next(state, self.grid, self.mask, self.params, self.rng,
                           blrm=self.surface_provider)

    def apply_decision(self, state: TrialState, decision: Decision) -> TrialState:
        at = state.current
        if decision.action in (Action.ELIMINATE_AND_MOVE, Action.STOP):
            state = mark_eliminated(state, self.mask, at)
        reason = check_stop(state, self.params, decision)
        if reason is not None:
            return replace(state, status=reason)
        return replace(state, current=decision.next)

    def post_cohort(self, at: Cell, dlt: int, override: bool, note: str | None) -> Decision:
        if self.state.status is not TrialStatus.RUNNING:
            raise ApiError(409, "trial_stopped", f"trial already stopped ({self.state.status.value})")
        if at != self.state.current and not override:
            raise ApiError(
                409, "wrong_combination",
                f"current recommendation is {list(self.state.current)}; pass override=true to force",
            )
        if at != self.state.current and override:
            self.state = replace(self.state, current=at)
        try:
            state = apply_cohort(self.state, self.mask, at, dlt, self.params.cohort_size)
        except ValueError as exc:
            raise ApiError(400, "invalid_cohort", str(exc)) from exc
        decision = self.decide(state)
        self.state = self.apply_decision(state, decision)
        self.events.append({
            "type": "cohort",
            "at": list(at),
            "dlt": dlt,
            "override": override,
            "note": note,
            "decision": decision_to_dict(decision),
            "status_after": self.state.status.value,
        })
        self.last_decision = decision
        return decision

    def to_document(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "created_at": self.created_at,
            "seed": self.seed,
            "params": params_to_dict(self.params),
            "grid": {"levels_a": list(self.grid.levels_a), "levels_b": list(self.grid.levels_b)},
            "mask": [list(c) for c in self.mask],
            "events": self.events,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "LiveTrial":
        grid = DoseGrid(tuple(doc["grid"]["levels_a"]), tuple(doc["grid"]["levels_b"]))
        mask = SubsetMask.from_cells(grid, [tuple(c) for c in doc["mask"]])
        trial = cls(doc["trial_id"], doc["created_at"], doc["seed"],
                    params_from_dict(doc["params"]), grid, mask)
        for event in doc["events"]:
            at = tuple(event["at"])
            decision = trial.post_cohort(at, event["dlt"], event.get("override", False),
                                         event.get("note"))
            stored = event["decision"]
            replayed = decision_to_dict(decision)
            if (replayed["action"], replayed["next"]) != (stored["action"], stored["next"]):
                raise ApiError(
                    500, "audit_mismatch",
                    f"replayed decision {replayed} does not match stored {stored}",
                )
        trial.events = doc["events"]
        return trial


def decision_to_dict(decision: Decision) -> dict:
    return {
        "action": decision.action.value,
        "next": list(decision.next) if decision.next else None,
        "candidates": [list(c) for c in decision.candidates],
        "tie_break": decision.tie_break.value,
        "rng_draws_consumed": decision.rng_draws_consumed,
    }


class TrialStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._trials: dict[str, LiveTrial] = {}
        self._lock = threading.Lock()

    def _path(self, trial_id: str) -> Path:
        return self.data_dir / f"{trial_id}.json"

    def create(self, params: DesignParams, grid: DoseGrid, mask: SubsetMask,
               seed: int | None) -> LiveTrial:
        trial_id = uuid.uuid4().hex[:12]
        if seed is None:
            seed = int.from_bytes(uuid.uuid4().bytes[:8], "big") >> 1
        trial = LiveTrial(trial_id, time.time(), seed, params, grid, mask)
        with self._lock:
            self._trials[trial_id] = trial
        self.persist(trial)
        return trial

    def get(self, trial_id: str) -> LiveTrial:
        with self._lock:
            trial = self._trials.get(trial_id)
        if trial is not None:
            return trial
        path = self._path(trial_id)
        if not path.exists():
            raise ApiError(404, "not_found", f"no trial {trial_id!r}")
        trial = LiveTrial.from_document(json.loads(path.read_text()))
        with self._lock:
            self._trials.setdefault(trial_id, trial)
            return self._trials[trial_id]

    def persist(self, trial: LiveTrial) -> None:
        tmp = self._path(trial.trial_id).with_suffix(".tmp")
        tmp.write_text(json.dumps(trial.to_document(), indent=1))
        tmp.replace(self._path(trial.trial_id))

    def list_ids(self) -> list[str]:
        with self._lock:
            cached = set(self._trials)
        on_disk = {p.stem for p in self.data_dir.glob("*.json")}
        return sorted(cached | on_disk)


def state_view(trial: LiveTrial) -> dict:
    state = trial.state
    grid = trial.grid
    cells = []
    for i in range(1, grid.n_levels_a + 1):
        for j in range(1, grid.n_levels_b + 1):
            cell = (i, j)
            n = state.n_at(cell)
            cells.append({
                "cell": [i, j],
                "doses": list(grid.doses(cell)),
                "in_mask": cell in trial.mask,
                "n": n,
                "dlt": state.y_at(cell),
                "rate": (state.y_at(cell) / n) if n else None,
                "eliminated": state.is_eliminated(cell),
            })
    return {
        "trial_id": trial.trial_id,
        "status": state.status.value,
        "current": list(state.current),
        "recommendation": list(trial.recommendation) if trial.recommendation else None,
        "cohorts_used": len(state.cohort_log),
        "max_cohorts": trial.params.max_cohorts,
        "cohort_size": trial.params.cohort_size,
        "total_n": state.total_n,
        "total_dlt": state.total_dlt,
        "lambda_e": trial.params.lambda_e,
        "lambda_d": trial.params.lambda_d,
        "cells": cells,
        "last_decision": decision_to_dict(trial.last_decision) if trial.last_decision else None,
    }


def what_if_rows(trial: LiveTrial) -> list[dict]:
    """Preview the decision for each possible DLT count of the next cohort.

    Uses a copy of the live rng state, so the preview for the count that is
    actually entered matches the decision the service will then make.
    """
    rows = []
    at = trial.state.current
    for dlt in range(trial.params.cohort_size + 1):
        state = apply_cohort(trial.state, trial.mask, at, dlt, trial.params.cohort_size)
        preview_rng = np.random.default_rng()
        preview_rng.bit_generator.state = trial.rng.bit_generator.state
        decision = decide_next(state, trial.grid, trial.mask, trial.params, preview_rng,
                               blrm=trial.surface_provider)
        rows.append({
            "dlt": dlt,
            "total_n": state.n_at(at),
            "total_dlt": state.y_at(at),
            "action": decision.action.value,
            "next": list(decision.next) if decision.next else None,
        })
    return rows


def create_app(data_dir: str | Path = "trial-data", token: str | None = None) -> FastAPI:
    app = FastAPI(title="combination dose-escalation conduct service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = TrialStore(data_dir)
    app.state.store = store

    def auth(request: Request) -> None:
        if token is not None and request.headers.get("x-auth-token") != token:
            raise ApiError(401, "unauthorized", "missing or invalid X-Auth-Token header")

    @app.exception_handler(ApiError)
    async def api_error_handler(_req, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.post("/trials", status_code=201)
    def create_trial(payload: dict, _=Depends(auth)):
        try:
            params = params_from_dict(payload["params"])
            grid_doc = payload["grid"]
            grid = DoseGrid(tuple(grid_doc["levels_a"]), tuple(grid_doc["levels_b"]))
            mask_cells = payload.get("mask")
            mask = (SubsetMask.from_cells(grid, [tuple(c) for c in mask_cells])
                    if mask_cells else SubsetMask.full(grid))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, "invalid_trial", str(exc)) from exc
        trial = store.create(params, grid, mask, payload.get("seed"))
        return state_view(trial)

    @app.get("/trials")
    def list_trials(_=Depends(auth)):
        return {"trials": store.list_ids()}

    @app.get("/trials/{trial_id}")
    def get_trial(trial_id: str, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            doc = state_view(trial)
            doc["params"] = params_to_dict(trial.params)
            doc["grid"] = {"levels_a": list(trial.grid.levels_a),
                           "levels_b": list(trial.grid.levels_b)}
            doc["mask"] = [list(c) for c in trial.mask]
            doc["events"] = trial.events
            return doc

    @app.post("/trials/{trial_id}/cohorts")
    def post_cohort(trial_id: str, payload: dict, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            try:
                at = tuple(int(v) for v in payload["at"])
                dlt = int(payload["dlt"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(400, "invalid_cohort", str(exc)) from exc
            decision = trial.post_cohort(at, dlt, bool(payload.get("override", False)),
                                         payload.get("note"))
            store.persist(trial)
            view = state_view(trial)
            view["decision"] = decision_to_dict(decision)
            return view

    @app.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            return {
                "status": trial.state.status.value,
                "recommendation": list(trial.recommendation) if trial.recommendation else None,
                "last_decision": decision_to_dict(trial.last_decision) if trial.last_decision else None,
            }

    @app.get("/trials/{trial_id}/selection")
    def get_selection(trial_id: str, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            if trial.state.status is TrialStatus.RUNNING:
                raise ApiError(409, "not_stopped", "trial is still running; no selection yet")
            if trial.state.status is TrialStatus.STOPPED_SAFETY:
                return {"selection": None, "doses": None, "estimates": {}, "status": trial.state.status.value}
            fit = fit_isotonic(trial.state, trial.mask)
            chosen = select_mtc(fit, trial.state, trial.params,
                                rng=np.random.default_rng(trial.seed))
            return {
                "selection": list(chosen) if chosen else None,
                "doses": list(trial.grid.doses(chosen)) if chosen else None,
                "estimates": {f"{i},{j}": v for (i, j), v in sorted(fit.estimates.items())},
                "status": trial.state.status.value,
            }

    @app.get("/trials/{trial_id}/decision-table")
    def get_decision_table(trial_id: str, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            table = decision_table(trial.params, trial.params.max_cohorts * trial.params.cohort_size)
            return {
                "phi": trial.params.phi,
                "lambda_e": table.lambda_e,
                "lambda_d": table.lambda_d,
                "epsilon": table.epsilon,
                "rows": [
                    {
                        "n": r.n,
                        "escalate_if_y_le": r.escalate_if_y_le,
                        "deescalate_if_y_ge": r.deescalate_if_y_ge,
                        "eliminate_if_y_ge": r.eliminate_if_y_ge,
                    }
                    for r in table.rows
                ],
            }

    @app.get("/trials/{trial_id}/what-if")
    def get_what_if(trial_id: str, _=Depends(auth)):
        trial = store.get(trial_id)
        with trial.lock:
            if trial.state.status is not TrialStatus.RUNNING:
                raise ApiError(409, "trial_stopped", "trial has stopped; nothing to preview")
            return {
                "at": list(trial.state.current),
                "cohort_size": trial.params.cohort_size,
                "rows": what_if_rows(trial),
            }

    return app
