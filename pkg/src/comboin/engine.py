"""The dose-assignment decision rule, parameterized over the four design
variants.

One function, `decide_next`, covers all variants: the baseline interval rule
over the full grid or an admissible subset (ties broken at random), the
exploratory variant that prefers an untried off-diagonal combination when
de-escalating, and the model-guided variant that consults the fitted logistic
surface whenever candidates are tied or untried. Elimination of overly toxic
combinations takes priority over the interval comparison.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Optional

import numpy as np

from .core import (
    Action,
    Cell,
    Decision,
    DesignParams,
    DesignVariant,
    DoseGrid,
    START_CELL,
    SubsetMask,
    TieBreak,
    TrialState,
    TrialStatus,
    TrialStoppedError,
    neighbors_down,
    neighbors_up,
)
from .posterior import BetaPosterior

TIE_TOL = 1e-12
BOUNDARY_TOL = 1e-12

# Supplies the model's posterior-mean surface for the current data; consumes
# the trial rng stream (for its sampler seed) only when actually invoked.
BlrmSurfaceProvider = Callable[[TrialState, np.random.Generator], np.ndarray]

# Optional replay hook: given the tied candidates, return the forced choice
# (or None to fall back to the seeded uniform draw).
TieChoice = Callable[[tuple[Cell, ...]], Optional[Cell]]


def apply_cohort(
    state: TrialState, mask: SubsetMask, at: Cell, dlt_count: int, cohort_size: int
) -> TrialState:
    """Record one cohort's outcomes at `at`."""
    if at not in mask:
        raise ValueError(f"cannot treat at {at}: not in the admissible subset")
    if state.is_eliminated(at):
        raise ValueError(f"cannot treat at {at}: combination was eliminated")
    if not 0 <= dlt_count <= cohort_size:
        raise ValueError(f"dlt_count must lie in 0..{cohort_size}, got {dlt_count}")
    n = state.n.copy()
    y = state.y.copy()
    n[at[0] - 1, at[1] - 1] += cohort_size
    y[at[0] - 1, at[1] - 1] += dlt_count
    return replace(state, n=n, y=y, cohort_log=state.cohort_log + ((at, dlt_count),))


def _interval_prob(state: TrialState, cell: Cell, params: DesignParams) -> float:
    post = BetaPosterior.from_counts(
        state.y_at(cell), state.n_at(cell), params.prior_a, params.prior_b
    )
    return post.interval_prob(params.lambda_e, params.lambda_d)


def _choose(
    state: TrialState,
    params: DesignParams,
    candidates: list[Cell],
    direction: str,
    rng: np.random.Generator,
    blrm: BlrmSurfaceProvider | None,
    tie_choice: TieChoice | None,
) -> tuple[Cell, TieBreak, int]:
    """Pick one candidate: interval-probability argmax plus variant rules."""
    if len(candidates) == 1:
        return candidates[0], TieBreak.NONE, 0

    if params.design is DesignVariant.BOIN_CE and direction == "down":
        unexplored = [c for c in candidates if state.n_at(c) == 0]
        explored = [c for c in candidates if state.n_at(c) > 0]
        if len(unexplored) == 1 and len(explored) == 1:
            return unexplored[0], TieBreak.EXPLORATORY_UNVISITED, 0

    probs = {c: _interval_prob(state, c, params) for c in candidates}
    best = max(probs.values())
    tied = [c for c in candidates if probs[c] >= best - TIE_TOL]

    if params.design is DesignVariant.BOIN_CB and (
        any(state.n_at(c) == 0 for c in candidates) or len(tied) > 1
    ):
        if blrm is None:
            raise ValueError("model-guided design requires a surface provider")
        surface = blrm(state, rng)
        dist = {c: abs(float(surface[c[0] - 1, c[1] - 1]) - params.phi) for c in candidates}
        closest = min(dist.values())
        near = [c for c in candidates if dist[c] <= closest + TIE_TOL]
        if len(near) == 1:
            return near[0], TieBreak.BLRM, 0
        pick = int(rng.integers(len(near)))
        return near[pick], TieBreak.BLRM, 1

    if len(tied) == 1:
        return tied[0], TieBreak.NONE, 0
    if tie_choice is not None:
        forced = tie_choice(tuple(tied))
        if forced is not None:
            if forced not in tied:
                raise ValueError(f"scripted tie choice {forced} not among {tied}")
            return forced, TieBreak.SCRIPTED, 0
    pick = int(rng.integers(len(tied)))
    return tied[pick], TieBreak.RANDOM, 1


def decide_next(
    state: TrialState,
    grid: DoseGrid,
    mask: SubsetMask,
    params: DesignParams,
    rng: np.random.Generator,
    blrm: BlrmSurfaceProvider | None = None,
    tie_choice: TieChoice | None = None,
) -> Decision:
    """Decide the assignment for the next cohort given the current state.

    The first cohort is placed by trial initialization, so the current
    combination always carries data when this is called. The elimination rule
    runs before the interval comparison; an eliminated current combination
    forces de-escalation, or a safety stop when the starting combination goes.
    """
    if state.status is not TrialStatus.RUNNING:
        raise TrialStoppedError(f"trial already stopped ({state.status.value})")
    cur = state.current
    n_cur = state.n_at(cur)
    if n_cur < 1:
        raise ValueError(f"no observations at current combination {cur}")

    post = BetaPosterior.from_counts(state.y_at(cur), n_cur, params.prior_a, params.prior_b)
    if (
        n_cur >= params.min_n_eliminate
        and post.overdose_prob(params.phi) >= params.epsilon - BOUNDARY_TOL
    ):
        if cur == START_CELL:
            return Decision(Action.STOP, None)
        down = sorted(
            c for c in neighbors_down(grid, mask, cur) if not state.is_eliminated(c)
        )
        if not down:
            return Decision(Action.STOP, None)
        chosen, tie_break, draws = _choose(state, params, down, "down", rng, blrm, tie_choice)
        return Decision(Action.ELIMINATE_AND_MOVE, chosen, tuple(down), tie_break, draws)

    p_hat = state.y_at(cur) / n_cur
    if p_hat <= params.lambda_e + BOUNDARY_TOL:
        up = sorted(c for c in neighbors_up(grid, mask, cur) if not state.is_eliminated(c))
        if up:
            chosen, tie_break, draws = _choose(state, params, up, "up", rng, blrm, tie_choice)
            return Decision(Action.ESCALATE, chosen, tuple(up), tie_break, draws)
    elif p_hat > params.lambda_d + BOUNDARY_TOL:
        down = sorted(
            c for c in neighbors_down(grid, mask, cur) if not state.is_eliminated(c)
        )
        if down:
            chosen, tie_break, draws = _choose(state, params, down, "down", rng, blrm, tie_choice)
            return Decision(Action.DEESCALATE, chosen, tuple(down), tie_break, draws)
    return Decision(Action.STAY, cur)


def check_stop(
    state: TrialState,
    params: DesignParams,
    decision: Decision,
) -> TrialStatus | None:
    """Stop reason after a cohort's decision, or None to keep enrolling.

    Convergence means enough patients sit at the current combination and the
    rule would keep them there; the cohort cap and the safety stop (starting
    combination eliminated) are checked afterwards.
    """
    if state.status is TrialStatus.STOPPED_SAFETY or decision.action is Action.STOP:
        return TrialStatus.STOPPED_SAFETY
    if (
        params.earlystop_n is not None
        and decision.action is Action.STAY
        and state.n_at(state.current) >= params.earlystop_n
    ):
        return TrialStatus.STOPPED_CONVERGED
    if len(state.cohort_log) >= params.max_cohorts:
        return TrialStatus.STOPPED_MAX_N
    return None
