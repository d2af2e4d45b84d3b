"""Beta-binomial posterior quantities used by the interval decision rules.

Two posterior probabilities drive everything: the probability that a
combination's DLT rate falls inside the optimal interval (used to rank
candidate moves) and the probability that it exceeds the target (the
overdose tail used for elimination). Both reduce to the regularized
incomplete beta function, evaluated here with a continued fraction so the
decision path carries no numeric dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

_MAX_ITER = 300
_CF_EPS = 3e-16
_FPMIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta integral (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


@lru_cache(maxsize=200_000)
def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), i.e. the Beta(a, b) CDF at x."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x < 0.0 or x > 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    # symmetry switch: evaluate the fraction on whichever tail converges fast
    if x > a / (a + b):
        return 1.0 - math.exp(ln_front) * _beta_continued_fraction(b, a, 1.0 - x) / b
    return math.exp(ln_front) * _beta_continued_fraction(a, b, x) / a


@dataclass(frozen=True)
class BetaPosterior:
    """Conjugate Beta posterior for one combination's DLT probability."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"Beta shapes must be positive, got ({self.a}, {self.b})")

    @classmethod
    def from_counts(
        cls, dlt: int, treated: int, prior_a: float = 1.0, prior_b: float = 1.0
    ) -> "BetaPosterior":
        if not 0 <= dlt <= treated:
            raise ValueError(f"need 0 <= dlt <= treated, got {dlt}/{treated}")
        return cls(prior_a + dlt, prior_b + treated - dlt)

    def cdf(self, x: float) -> float:
        return regularized_incomplete_beta(self.a, self.b, x)

    def interval_prob(self, lo: float, hi: float) -> float:
        """Posterior probability that the DLT rate lies in (lo, hi)."""
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
        return self.cdf(hi) - self.cdf(lo)

    def overdose_prob(self, phi: float) -> float:
        """Posterior probability that the DLT rate exceeds the target phi."""
        if not 0.0 < phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {phi}")
        return 1.0 - self.cdf(phi)
