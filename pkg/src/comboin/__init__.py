"""Interval-based dose-escalation designs for dual-agent combination trials.

Decision engine for the four design variants over an arbitrary admissible
subset of a two-drug dose grid, a Monte Carlo simulator of operating
characteristics, and a trial-conduct HTTP service.
"""

from .core import (
    Action,
    Cell,
    Decision,
    DesignParams,
    DesignVariant,
    DoseGrid,
    Scenario,
    SubsetMask,
    TieBreak,
    TrialState,
    TrialStatus,
    mark_eliminated,
    neighbors_down,
    neighbors_up,
)
from .boundaries import DecisionTable, decision_table, lambda_boundaries
from .posterior import BetaPosterior
from .isotonic import IsotonicFit, fit_isotonic, select_mtc
from .engine import apply_cohort, check_stop, decide_next
from .simulator import (
    OperatingCharacteristics,
    ReplayScript,
    TrialResult,
    run_matrix,
    run_study,
    run_trial,
    run_trials,
)

__all__ = [
    "Action",
    "BetaPosterior",
    "Cell",
    "Decision",
    "DecisionTable",
    "DesignParams",
    "DesignVariant",
    "DoseGrid",
    "IsotonicFit",
    "OperatingCharacteristics",
    "ReplayScript",
    "Scenario",
    "SubsetMask",
    "TieBreak",
    "TrialResult",
    "TrialState",
    "TrialStatus",
    "apply_cohort",
    "check_stop",
    "decide_next",
    "decision_table",
    "fit_isotonic",
    "lambda_boundaries",
    "mark_eliminated",
    "neighbors_down",
    "neighbors_up",
    "run_matrix",
    "run_study",
    "run_trial",
    "run_trials",
    "select_mtc",
]
