"""Optimal interval boundaries and pre-tabulated per-n decision rules.

The escalation boundary lambda_e and de-escalation boundary lambda_d are
closed forms of the target rate phi and the under/over-dosing thresholds
(phi1, phi2). The decision table turns them, together with the posterior
overdose tail, into the escalate / stay / de-escalate / eliminate counts a
trial team can read off directly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

from .posterior import BetaPosterior

# absolute guard so rate-equals-boundary coincidences resolve deterministically
BOUNDARY_TOL = 1e-12


def lambda_boundaries(phi: float, phi1: float, phi2: float) -> tuple[float, float]:
    """Closed-form escalation/de-escalation boundaries for the target phi."""
    if not 0.0 < phi1 < phi < phi2 < 1.0:
        raise ValueError(
            f"need 0 < phi1 < phi < phi2 < 1, got phi1={phi1}, phi={phi}, phi2={phi2}"
        )
    lambda_e = math.log((1 - phi1) / (1 - phi)) / math.log(
        phi * (1 - phi1) / (phi1 * (1 - phi))
    )
    lambda_d = math.log((1 - phi) / (1 - phi2)) / math.log(
        phi2 * (1 - phi) / (phi * (1 - phi2))
    )
    if not lambda_e < phi < lambda_d:
        raise AssertionError("boundary ordering violated; inputs out of supported range")
    return lambda_e, lambda_d


def classify_rate(n: int, y: int, lambda_e: float, lambda_d: float) -> str:
    """Direct comparison of the observed rate against the interval."""
    if n < 1 or not 0 <= y <= n:
        raise ValueError(f"invalid counts y={y}, n={n}")
    p_hat = y / n
    if p_hat <= lambda_e + BOUNDARY_TOL:
        return "escalate"
    if p_hat > lambda_d + BOUNDARY_TOL:
        return "deescalate"
    return "stay"


@dataclass(frozen=True)
class DecisionRow:
    n: int
    escalate_if_y_le: int
    deescalate_if_y_ge: int
    eliminate_if_y_ge: int | None


@dataclass(frozen=True)
class DecisionTable:
    phi: float
    lambda_e: float
    lambda_d: float
    epsilon: float
    rows: tuple[DecisionRow, ...]

    def row(self, n: int) -> DecisionRow:
        if not 1 <= n <= len(self.rows):
            raise ValueError(f"n={n} outside tabulated range 1..{len(self.rows)}")
        return self.rows[n - 1]

    def action(self, n: int, y: int) -> str:
        """escalate / stay / deescalate / eliminate for observed counts."""
        r = self.row(n)
        if r.eliminate_if_y_ge is not None and y >= r.eliminate_if_y_ge:
            return "eliminate"
        if y <= r.escalate_if_y_le:
            return "escalate"
        if y >= r.deescalate_if_y_ge:
            return "deescalate"
        return "stay"


def decision_table(params, n_max: int) -> DecisionTable:
    """Tabulate boundary and elimination counts for n = 1..n_max.

    `params` is a DesignParams; only its boundary, prior, and elimination
    fields are read.
    """
    if n_max < params.cohort_size:
        raise ValueError(f"n_max={n_max} smaller than one cohort ({params.cohort_size})")
    rows = []
    for n in range(1, n_max + 1):
        esc = max(y for y in range(0, n + 1) if y / n <= params.lambda_e + BOUNDARY_TOL)
        dee = min(y for y in range(0, n + 2) if y > n * (params.lambda_d + BOUNDARY_TOL))
        eli = None
        if n >= params.min_n_eliminate:
            for y in range(0, n + 1):
                post = BetaPosterior.from_counts(y, n, params.prior_a, params.prior_b)
                if post.overdose_prob(params.phi) >= params.epsilon - BOUNDARY_TOL:
                    eli = y
                    break
        rows.append(DecisionRow(n, esc, min(dee, n + 1), eli))
    return DecisionTable(params.phi, params.lambda_e, params.lambda_d, params.epsilon, tuple(rows))


def format_table_text(table: DecisionTable) -> str:
    out = io.StringIO()
    out.write(
        f"target={table.phi:g}  lambda_e={table.lambda_e:.4f}  "
        f"lambda_d={table.lambda_d:.4f}  elimination cutoff={table.epsilon:g}\n"
    )
    out.write(f"{'n':>4} {'escalate if y<=':>16} {'de-escalate if y>=':>19} {'eliminate if y>=':>17}\n")
    for r in table.rows:
        eli = "-" if r.eliminate_if_y_ge is None else str(r.eliminate_if_y_ge)
        out.write(f"{r.n:>4} {r.escalate_if_y_le:>16} {r.deescalate_if_y_ge:>19} {eli:>17}\n")
    return out.getvalue()


def format_table_csv(table: DecisionTable) -> str:
    lines = ["n,escalate_if_y_le,deescalate_if_y_ge,eliminate_if_y_ge"]
    for r in table.rows:
        eli = "" if r.eliminate_if_y_ge is None else str(r.eliminate_if_y_ge)
        lines.append(f"{r.n},{r.escalate_if_y_le},{r.deescalate_if_y_ge},{eli}")
    return "\n".join(lines) + "\n"
