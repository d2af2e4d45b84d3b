"""Shared domain types for dual-agent dose-escalation trials.

Combinations are addressed by 1-based index pairs (i, j): level i of drug A
and level j of drug B. Toxicity is assumed nondecreasing in each coordinate,
so the grid carries the componentwise partial order. All types are immutable
values; operations return new values, which makes them safe to share across
parallel simulation workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .boundaries import lambda_boundaries

Cell = tuple[int, int]

START_CELL: Cell = (1, 1)


class DesignVariant(str, enum.Enum):
    BOIN_C = "boin-c"
    BOIN_CS = "boin-cs"
    BOIN_CE = "boin-ce"
    BOIN_CB = "boin-cb"


class TrialStatus(str, enum.Enum):
    RUNNING = "running"
    STOPPED_CONVERGED = "stopped_converged"
    STOPPED_MAX_N = "stopped_max_n"
    STOPPED_SAFETY = "stopped_safety"


class Action(str, enum.Enum):
    ESCALATE = "escalate"
    STAY = "stay"
    DEESCALATE = "deescalate"
    ELIMINATE_AND_MOVE = "eliminate_and_move"
    STOP = "stop"


class TieBreak(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"
    EXPLORATORY_UNVISITED = "exploratory_unvisited"
    BLRM = "blrm"
    SCRIPTED = "scripted"


class TrialStoppedError(RuntimeError):
    """Raised when a decision is requested from a trial that already stopped."""


@dataclass(frozen=True)
class DoseGrid:
    """The two-drug dose matrix: actual dose values per level."""

    levels_a: tuple[float, ...]
    levels_b: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels_a", tuple(float(x) for x in self.levels_a))
        object.__setattr__(self, "levels_b", tuple(float(x) for x in self.levels_b))
        for name, levels in (("levels_a", self.levels_a), ("levels_b", self.levels_b)):
            if not levels:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError(f"{name} must be strictly increasing, got {levels}")

    @property
    def n_levels_a(self) -> int:
        return len(self.levels_a)

    @property
    def n_levels_b(self) -> int:
        return len(self.levels_b)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_levels_a, self.n_levels_b)

    def contains(self, cell: Cell) -> bool:
        i, j = cell
        return 1 <= i <= self.n_levels_a and 1 <= j <= self.n_levels_b

    def cells(self) -> Iterator[Cell]:
        for i in range(1, self.n_levels_a + 1):
            for j in range(1, self.n_levels_b + 1):
                yield (i, j)

    def doses(self, cell: Cell) -> tuple[float, float]:
        i, j = cell
        return (self.levels_a[i - 1], self.levels_b[j - 1])


@dataclass(frozen=True)
class SubsetMask:
    """The prespecified admissible subset of combinations open to the trial.

    Every admissible combination must be reachable from the starting
    combination (1, 1) by single-axis one-level escalation steps that stay
    inside the subset; otherwise part of the subset could never be dosed.
    """

    cells: frozenset[Cell]
    shape: tuple[int, int]

    @classmethod
    def from_cells(cls, grid: DoseGrid, cells) -> "SubsetMask":
        cellset = frozenset((int(i), int(j)) for i, j in cells)
        mask = cls(cellset, grid.shape)
        mask.validate(grid)
        return mask

    @classmethod
    def full(cls, grid: DoseGrid) -> "SubsetMask":
        return cls(frozenset(grid.cells()), grid.shape)

    def validate(self, grid: DoseGrid) -> None:
        if grid.shape != self.shape:
            raise ValueError(f"mask shape {self.shape} does not match grid {grid.shape}")
        if not self.cells:
            raise ValueError("mask must be nonempty")
        for cell in self.cells:
            if not grid.contains(cell):
                raise ValueError(f"mask cell {cell} outside grid {grid.shape}")
        if START_CELL not in self.cells:
            raise ValueError("mask must include the starting combination (1, 1)")
        unreachable = self.cells - self._reachable_up()
        if unreachable:
            raise ValueError(
                "mask is not connected: no single-step escalation path from (1, 1) "
                f"to {sorted(unreachable)}"
            )

    def _reachable_up(self) -> set[Cell]:
        seen = {START_CELL} if START_CELL in self.cells else set()
        frontier = list(seen)
        while frontier:
            i, j = frontier.pop()
            for nxt in ((i + 1, j), (i, j + 1)):
                if nxt in self.cells and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def __contains__(self, cell: Cell) -> bool:
        return cell in self.cells

    def __iter__(self) -> Iterator[Cell]:
        return iter(sorted(self.cells))

    def __len__(self) -> int:
        return len(self.cells)


def neighbors_up(grid: DoseGrid, mask: SubsetMask, at: Cell) -> set[Cell]:
    """Admissible single-step escalation moves from `at`."""
    if at not in mask:
        raise ValueError(f"{at} is not in the admissible subset")
    i, j = at
    return {c for c in ((i + 1, j), (i, j + 1)) if grid.contains(c) and c in mask}


def neighbors_down(grid: DoseGrid, mask: SubsetMask, at: Cell) -> set[Cell]:
    """Admissible single-step de-escalation moves from `at`."""
    if at not in mask:
        raise ValueError(f"{at} is not in the admissible subset")
    i, j = at
    return {c for c in ((i - 1, j), (i, j - 1)) if grid.contains(c) and c in mask}


@dataclass(frozen=True)
class DesignParams:
    """Design configuration: target interval, safety rule, and trial caps."""

    phi: float
    phi1: float
    phi2: float
    lambda_e: float = field(default=None)  # type: ignore[assignment]
    lambda_d: float = field(default=None)  # type: ignore[assignment]
    epsilon: float = 0.95
    cohort_size: int = 3
    max_cohorts: int = 15
    earlystop_n: int | None = 9
    design: DesignVariant = DesignVariant.BOIN_CS
    prior_a: float = 1.0
    prior_b: float = 1.0
    require_mtc_below_lambda_d: bool = False
    mtc_tie_rule: str = "lowest-estimate"
    min_n_eliminate: int = 3
    # model-guided tie-breaking ranks candidates on this surface: "prior"
    # anchors one zero-data fit per trial, "refit" refits on accumulated data
    # at every tie
    cb_surface: str = "prior"

    def __post_init__(self) -> None:
        if not 0.0 < self.phi1 < self.phi < self.phi2 < 1.0:
            raise ValueError(
                f"need 0 < phi1 < phi < phi2 < 1, got ({self.phi1}, {self.phi}, {self.phi2})"
            )
        if self.lambda_e is None or self.lambda_d is None:
            le, ld = lambda_boundaries(self.phi, self.phi1, self.phi2)
            object.__setattr__(self, "lambda_e", le)
            object.__setattr__(self, "lambda_d", ld)
        if not self.lambda_e < self.phi < self.lambda_d:
            raise ValueError("boundaries must bracket the target rate")
        if not 0.5 < self.epsilon < 1.0:
            raise ValueError(f"elimination cutoff must lie in (0.5, 1), got {self.epsilon}")
        if self.cohort_size < 1:
            raise ValueError("cohort_size must be >= 1")
        if self.max_cohorts < 1:
            raise ValueError("max_cohorts must be >= 1")
        if self.earlystop_n is not None and (
            self.earlystop_n < 1 or self.earlystop_n % self.cohort_size != 0
        ):
            raise ValueError("earlystop_n must be a positive multiple of cohort_size or None")
        if isinstance(self.design, str):
            object.__setattr__(self, "design", DesignVariant(self.design))
        if self.prior_a <= 0 or self.prior_b <= 0:
            raise ValueError("prior shapes must be positive")
        if self.min_n_eliminate < 1:
            raise ValueError("min_n_eliminate must be >= 1")
        if self.cb_surface not in ("prior", "refit"):
            raise ValueError(f"cb_surface must be 'prior' or 'refit', got {self.cb_surface!r}")

    @classmethod
    def from_target(cls, phi: float, phi1: float | None = None, phi2: float | None = None, **kw) -> "DesignParams":
        """Standard construction: phi1 = 0.6*phi, phi2 = 1.4*phi unless given."""
        return cls(phi=phi, phi1=phi1 if phi1 is not None else 0.6 * phi,
                   phi2=phi2 if phi2 is not None else 1.4 * phi, **kw)


@dataclass(frozen=True)
class TrialState:
    """Accumulated trial data: per-combination counts plus conduct status."""

    n: np.ndarray
    y: np.ndarray
    eliminated: np.ndarray
    current: Cell
    status: TrialStatus
    cohort_log: tuple[tuple[Cell, int], ...]

    @classmethod
    def initial(cls, grid: DoseGrid) -> "TrialState":
        shape = grid.shape
        return cls(
            n=np.zeros(shape, dtype=np.int64),
            y=np.zeros(shape, dtype=np.int64),
            eliminated=np.zeros(shape, dtype=bool),
            current=START_CELL,
            status=TrialStatus.RUNNING,
            cohort_log=(),
        )

    def n_at(self, cell: Cell) -> int:
        return int(self.n[cell[0] - 1, cell[1] - 1])

    def y_at(self, cell: Cell) -> int:
        return int(self.y[cell[0] - 1, cell[1] - 1])

    def is_eliminated(self, cell: Cell) -> bool:
        return bool(self.eliminated[cell[0] - 1, cell[1] - 1])

    def treated_cells(self) -> list[Cell]:
        ii, jj = np.nonzero(self.n)
        return [(int(i) + 1, int(j) + 1) for i, j in zip(ii, jj)]

    def eliminated_cells(self) -> list[Cell]:
        ii, jj = np.nonzero(self.eliminated)
        return [(int(i) + 1, int(j) + 1) for i, j in zip(ii, jj)]

    @property
    def total_n(self) -> int:
        return int(self.n.sum())

    @property
    def total_dlt(self) -> int:
        return int(self.y.sum())

    def check_invariants(self, mask: SubsetMask) -> None:
        """Raise if the state violates its structural invariants (test aid)."""
        if np.any(self.y > self.n) or np.any(self.n < 0) or np.any(self.y < 0):
            raise AssertionError("counts out of range")
        for cell in self.treated_cells():
            if cell not in mask:
                raise AssertionError(f"patients recorded at unmasked cell {cell}")
        for (i, j) in self.eliminated_cells():
            for (i2, j2) in mask:
                if i2 >= i and j2 >= j and not self.is_eliminated((i2, j2)):
                    raise AssertionError(f"elimination not upward closed at ({i2},{j2})")
        if self.status is TrialStatus.RUNNING:
            if self.current not in mask or self.is_eliminated(self.current):
                raise AssertionError("current combination invalid while running")


@dataclass(frozen=True)
class Scenario:
    """A named truth: per-combination DLT probabilities and the target set."""

    name: str
    true_tox: np.ndarray
    mtc_set: frozenset[Cell]
    acceptable_lo: float = 0.16
    acceptable_hi: float = 0.33

    def __post_init__(self) -> None:
        tox = np.asarray(self.true_tox, dtype=float)
        object.__setattr__(self, "true_tox", tox)
        object.__setattr__(self, "mtc_set", frozenset((int(i), int(j)) for i, j in self.mtc_set))
        if np.any(tox < 0) or np.any(tox > 1):
            raise ValueError("true toxicity probabilities must lie in [0, 1]")
        for cell in self.mtc_set:
            t = self.tox_at(cell)
            if not self.acceptable_lo <= t <= self.acceptable_hi:
                raise ValueError(
                    f"designated MTC {cell} has true toxicity {t} outside "
                    f"[{self.acceptable_lo}, {self.acceptable_hi}]"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.true_tox.shape  # type: ignore[return-value]

    def tox_at(self, cell: Cell) -> float:
        return float(self.true_tox[cell[0] - 1, cell[1] - 1])

    def classify_cell(self, cell: Cell) -> str:
        t = self.tox_at(cell)
        if t > self.acceptable_hi:
            return "over"
        if t < self.acceptable_lo:
            return "under"
        return "acceptable"


@dataclass(frozen=True)
class Decision:
    """Outcome of one dose-assignment decision."""

    action: Action
    next: Cell | None
    candidates: tuple[Cell, ...] = ()
    tie_break: TieBreak = TieBreak.NONE
    rng_draws_consumed: int = 0


def mark_eliminated(state: TrialState, mask: SubsetMask, at: Cell) -> TrialState:
    """Eliminate `at` and every admissible combination above it.

    Eliminating the starting combination stops the trial for safety.
    """
    if at not in mask:
        raise ValueError(f"{at} is not in the admissible subset")
    i0, j0 = at
    eliminated = state.eliminated.copy()
    for (i, j) in mask:
        if i >= i0 and j >= j0:
            eliminated[i - 1, j - 1] = True
    status = state.status
    if eliminated[START_CELL[0] - 1, START_CELL[1] - 1]:
        status = TrialStatus.STOPPED_SAFETY
    return replace(state, eliminated=eliminated, status=status)
