"""Monte Carlo trial engine: simulate whole trials under a toxicity scenario
and aggregate operating characteristics over replications.

Each replication is driven by its own counter-derived seed (see `seeds`), so
a study is bit-reproducible regardless of parallelism. A replay script can
replace the sampled outcomes and force tie choices, which is how recorded
trial trajectories are reproduced exactly.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import blrm
from .core import (
    Action,
    Cell,
    DesignParams,
    DesignVariant,
    DoseGrid,
    Scenario,
    SubsetMask,
    TrialState,
    TrialStatus,
    mark_eliminated,
)
from .engine import apply_cohort, check_stop, decide_next
from .isotonic import fit_isotonic, select_mtc
from .seeds import child_seed


@dataclass(frozen=True)
class TrialResult:
    selection: Cell | None
    total_n: int
    total_dlt: int
    pts_over_tox: int
    path: tuple[tuple[Cell, int], ...]
    stop_reason: TrialStatus


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Percent selection buckets plus patient-burden averages over a study."""

    pcs: float
    pas: float
    over_sel: float
    under_sel: float
    none_sel: float
    mean_n: float
    mean_dlt: float
    mean_pts_over_tox: float
    replications: int

    def as_dict(self) -> dict:
        return {
            "pcs": self.pcs,
            "pas": self.pas,
            "over_sel": self.over_sel,
            "under_sel": self.under_sel,
            "none_sel": self.none_sel,
            "mean_n": self.mean_n,
            "mean_dlt": self.mean_dlt,
            "mean_pts_over_tox": self.mean_pts_over_tox,
            "replications": self.replications,
        }


@dataclass
class ReplayScript:
    """Injected per-cohort DLT counts and forced tie choices for one trial."""

    outcomes: Sequence[int]
    tie_choices: dict[int, Cell] = field(default_factory=dict)
    _cohort: int = 0
    _ties_seen: int = 0

    def next_outcome(self) -> int:
        if self._cohort >= len(self.outcomes):
            raise ValueError("replay script ran out of cohort outcomes")
        out = self.outcomes[self._cohort]
        self._cohort += 1
        return out

    def tie_choice(self, candidates: tuple[Cell, ...]) -> Optional[Cell]:
        choice = self.tie_choices.get(self._ties_seen)
        self._ties_seen += 1
        return choice


class CachingSurfaceProvider:
    """Supplies the model surface used to rank tied candidates.

    In "prior" mode a single zero-data fit is computed lazily per trial and
    reused, so candidates are ranked on the prior-anchored surface. In
    "refit" mode the model is refitted to the accumulated data whenever a tie
    actually needs breaking (cached per data snapshot). The trial's rng
    stream supplies the sampler seed only when a fit really runs, keeping
    replications deterministic.
    """

    def __init__(
        self,
        prior: blrm.BlrmPrior,
        grid: DoseGrid,
        mask: SubsetMask,
        mcmc: blrm.McmcConfig,
        mode: str = "prior",
    ):
        if mode not in ("prior", "refit"):
            raise ValueError(f"mode must be 'prior' or 'refit', got {mode!r}")
        self.prior = prior
        self.grid = grid
        self.mask = mask
        self.mcmc = mcmc
        self.mode = mode
        self._cache: dict[bytes, np.ndarray] = {}

    def __call__(self, state: TrialState, rng: np.random.Generator) -> np.ndarray:
        if self.mode == "prior":
            fit_state = TrialState.initial(self.grid)
        else:
            fit_state = state
        key = fit_state.n.tobytes() + fit_state.y.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        seed = int(rng.integers(0, 2**63 - 1))
        fit = blrm.fit(self.prior, fit_state, self.grid, self.mask, self.mcmc, seed)
        self._cache[key] = fit.mean_surface
        return fit.mean_surface


def run_trial(
    scenario: Scenario,
    grid: DoseGrid,
    mask: SubsetMask,
    params: DesignParams,
    seed: int,
    blrm_prior: blrm.BlrmPrior | None = None,
    mcmc: blrm.McmcConfig | None = None,
    script: ReplayScript | None = None,
) -> TrialResult:
    """Simulate one trial to completion; deterministic given the seed."""
    if scenario.shape != grid.shape:
        raise ValueError(f"scenario shape {scenario.shape} does not match grid {grid.shape}")
    rng = np.random.default_rng(seed)
    provider = None
    if params.design is DesignVariant.BOIN_CB:
        provider = CachingSurfaceProvider(
            blrm_prior or blrm.BlrmPrior.default(),
            grid,
            mask,
            mcmc or blrm.McmcConfig(),
            mode=params.cb_surface,
        )
    state = TrialState.initial(grid)
    while True:
        cell = state.current
        if script is not None:
            dlt = script.next_outcome()
        else:
            dlt = int(rng.binomial(params.cohort_size, scenario.tox_at(cell)))
        state = apply_cohort(state, mask, cell, dlt, params.cohort_size)
        decision = decide_next(
            state,
            grid,
            mask,
            params,
            rng,
            blrm=provider,
            tie_choice=script.tie_choice if script is not None else None,
        )
        if decision.action in (Action.ELIMINATE_AND_MOVE, Action.STOP):
            state = mark_eliminated(state, mask, cell)
        reason = check_stop(state, params, decision)
        if reason is not None:
            state = replace(state, status=reason)
            break
        state = replace(state, current=decision.next)

    selection = None
    if state.status is not TrialStatus.STOPPED_SAFETY:
        selection = select_mtc(fit_isotonic(state, mask), state, params, rng=rng)
    over_cells = [
        c for c in state.treated_cells() if scenario.tox_at(c) > scenario.acceptable_hi
    ]
    return TrialResult(
        selection=selection,
        total_n=state.total_n,
        total_dlt=state.total_dlt,
        pts_over_tox=sum(state.n_at(c) for c in over_cells),
        path=state.cohort_log,
        stop_reason=state.status,
    )


def summarize(scenario: Scenario, results: Sequence[TrialResult]) -> OperatingCharacteristics:
    r = len(results)
    if r == 0:
        raise ValueError("no replications to summarize")
    correct = acceptable = over = under = none = 0
    for res in results:
        if res.selection is None:
            none += 1
            continue
        if res.selection in scenario.mtc_set:
            correct += 1
        bucket = scenario.classify_cell(res.selection)
        if bucket == "acceptable":
            acceptable += 1
        elif bucket == "over":
            over += 1
        else:
            under += 1
    return OperatingCharacteristics(
        pcs=100.0 * correct / r,
        pas=100.0 * acceptable / r,
        over_sel=100.0 * over / r,
        under_sel=100.0 * under / r,
        none_sel=100.0 * none / r,
        mean_n=sum(res.total_n for res in results) / r,
        mean_dlt=sum(res.total_dlt for res in results) / r,
        mean_pts_over_tox=sum(res.pts_over_tox for res in results) / r,
        replications=r,
    )


def _run_batch(args) -> list[TrialResult]:
    scenario, grid, mask, params, seeds, blrm_prior, mcmc = args
    return [
        run_trial(scenario, grid, mask, params, s, blrm_prior=blrm_prior, mcmc=mcmc)
        for s in seeds
    ]


def run_trials(
    scenario: Scenario,
    grid: DoseGrid,
    mask: SubsetMask,
    params: DesignParams,
    reps: int,
    root_seed: int,
    parallelism: int = 1,
    scenario_index: int = 0,
    config_index: int = 0,
    blrm_prior: blrm.BlrmPrior | None = None,
    mcmc: blrm.McmcConfig | None = None,
) -> list[TrialResult]:
    """All replication results, ordered by replication index."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seeds = [child_seed(root_seed, scenario_index, config_index, r) for r in range(reps)]
    if parallelism <= 1:
        return _run_batch((scenario, grid, mask, params, seeds, blrm_prior, mcmc))
    chunk = max(1, (reps + parallelism - 1) // parallelism)
    batches = [
        (scenario, grid, mask, params, seeds[k : k + chunk], blrm_prior, mcmc)
        for k in range(0, reps, chunk)
    ]
    results: list[TrialResult] = []
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        for part in pool.map(_run_batch, batches):
            results.extend(part)
    return results


def run_study(
    scenario: Scenario,
    grid: DoseGrid,
    mask: SubsetMask,
    params: DesignParams,
    reps: int,
    root_seed: int,
    parallelism: int = 1,
    scenario_index: int = 0,
    config_index: int = 0,
    blrm_prior: blrm.BlrmPrior | None = None,
    mcmc: blrm.McmcConfig | None = None,
) -> OperatingCharacteristics:
    results = run_trials(
        scenario, grid, mask, params, reps, root_seed, parallelism,
        scenario_index, config_index, blrm_prior, mcmc,
    )
    return summarize(scenario, results)


def run_matrix(
    scenarios: Sequence[Scenario],
    grid: DoseGrid,
    configs: Sequence[tuple[str, SubsetMask, DesignParams]],
    reps: int,
    root_seed: int,
    parallelism: int = 1,
    blrm_prior: blrm.BlrmPrior | None = None,
    mcmc: blrm.McmcConfig | None = None,
) -> list[dict]:
    """Cross-product study: one record per (scenario, configuration)."""
    records = []
    for s_idx, scenario in enumerate(scenarios):
        for c_idx, (label, mask, params) in enumerate(configs):
            oc = run_study(
                scenario, grid, mask, params, reps, root_seed, parallelism,
                scenario_index=s_idx, config_index=c_idx,
                blrm_prior=blrm_prior, mcmc=mcmc,
            )
            records.append(
                {"scenario": scenario.name, "config": label, "design": params.design.value}
                | oc.as_dict()
            )
    return records
