"""Weighted isotonic regression over the treated combinations, and final
selection of the maximum tolerated combination.

The observed DLT rates are projected (weighted least squares, weights equal
to patients treated) onto the cone of surfaces that are nondecreasing along
the componentwise partial order restricted to the treated cells. The
projection is computed by cyclically enforcing each covering-pair constraint
with Dykstra-style correction terms, which converges to the exact projection
onto the intersection of the pairwise cones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Cell, DesignParams, SubsetMask, TrialState, TrialStatus

_CONVERGENCE_TOL = 1e-12
_MAX_SWEEPS = 10_000
_TIE_TOL = 1e-12


def order_pairs(cells: list[Cell]) -> list[tuple[int, int]]:
    """Covering pairs (u, v) of the componentwise order restricted to `cells`.

    Returned as index pairs into `cells`; the transitive closure of the
    covering relation is the full restricted order.
    """
    k = len(cells)
    leq = [[False] * k for _ in range(k)]
    for u in range(k):
        for v in range(k):
            if u != v:
                (i1, j1), (i2, j2) = cells[u], cells[v]
                leq[u][v] = i1 <= i2 and j1 <= j2
    pairs = []
    for u in range(k):
        for v in range(k):
            if leq[u][v] and not any(leq[u][w] and leq[w][v] for w in range(k)):
                pairs.append((u, v))
    return pairs


@dataclass(frozen=True)
class IsotonicFit:
    estimates: dict[Cell, float]
    weights: dict[Cell, float]

    def cells(self) -> list[Cell]:
        return sorted(self.estimates)


def _project_pairs(values: np.ndarray, weights: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    x = values.astype(float).copy()
    if not pairs:
        return x
    # Dykstra corrections, one per constraint
    corr = np.zeros((len(pairs), 2))
    for _ in range(_MAX_SWEEPS):
        max_move = 0.0
        for idx, (u, v) in enumerate(pairs):
            xu = x[u] + corr[idx, 0]
            xv = x[v] + corr[idx, 1]
            if xu > xv:
                pooled = (weights[u] * xu + weights[v] * xv) / (weights[u] + weights[v])
                new_u, new_v = pooled, pooled
            else:
                new_u, new_v = xu, xv
            corr[idx, 0] = xu - new_u
            corr[idx, 1] = xv - new_v
            max_move = max(max_move, abs(new_u - x[u]), abs(new_v - x[v]))
            x[u], x[v] = new_u, new_v
        if max_move < _CONVERGENCE_TOL:
            break
    return x


def fit_isotonic(state: TrialState, mask: SubsetMask) -> IsotonicFit:
    """Project observed rates at treated cells onto the monotone cone."""
    cells = sorted(state.treated_cells())
    if not cells:
        raise ValueError("no treated combinations to fit")
    weights = np.array([state.n_at(c) for c in cells], dtype=float)
    rates = np.array([state.y_at(c) / state.n_at(c) for c in cells])
    fitted = _project_pairs(rates, weights, order_pairs(cells))
    # snap tiny constraint residue left by finite sweeps
    fitted = np.clip(fitted, 0.0, 1.0)
    return IsotonicFit(
        estimates={c: float(v) for c, v in zip(cells, fitted)},
        weights={c: float(w) for c, w in zip(cells, weights)},
    )


def select_mtc(
    fit: IsotonicFit,
    state: TrialState,
    params: DesignParams,
    rng: np.random.Generator | None = None,
) -> Cell | None:
    """Pick the treated, non-eliminated combination whose isotonic estimate is
    closest to the target; None if the trial stopped for safety or nothing is
    admissible."""
    if state.status is TrialStatus.RUNNING:
        raise ValueError("selection is only defined once the trial has stopped")
    if state.status is TrialStatus.STOPPED_SAFETY:
        return None
    candidates = [c for c in fit.estimates if not state.is_eliminated(c)]
    if params.require_mtc_below_lambda_d:
        candidates = [c for c in candidates if fit.estimates[c] <= params.lambda_d + _TIE_TOL]
    if not candidates:
        return None
    dist = {c: abs(fit.estimates[c] - params.phi) for c in candidates}
    best = min(dist.values())
    tied = sorted(c for c in candidates if dist[c] <= best + _TIE_TOL)
    if len(tied) > 1:
        # deterministic rule: prefer the lower estimated toxicity, then more data
        lowest = min(fit.estimates[c] for c in tied)
        tied = [c for c in tied if fit.estimates[c] <= lowest + _TIE_TOL]
        if len(tied) > 1:
            most_n = max(state.n_at(c) for c in tied)
            tied = [c for c in tied if state.n_at(c) == most_n]
    if len(tied) == 1:
        return tied[0]
    rng = rng if rng is not None else np.random.default_rng(0)
    return tied[int(rng.integers(len(tied)))]
