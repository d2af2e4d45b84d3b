"""Dual-agent Bayesian logistic toxicity surface, fitted by adaptive
random-walk Metropolis.

The model puts log-scale marginal slopes on each drug's rescaled dose plus a
multiplicative interaction term inside the logit, with bivariate normal
priors on each drug's (log intercept, log slope) pair and a normal prior on
the interaction. The fitted posterior mean surface is consulted only to rank
candidate combinations when the interval probabilities cannot separate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DoseGrid, SubsetMask, TrialState


def logit(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"logit needs p in (0,1), got {p}")
    return math.log(p / (1.0 - p))


def dose_rescale(grid: DoseGrid) -> tuple[np.ndarray, np.ndarray]:
    """Scale each drug's levels by its highest level, so the top level is 1."""
    a = np.asarray(grid.levels_a, dtype=float)
    b = np.asarray(grid.levels_b, dtype=float)
    return a / a[-1], b / b[-1]


@dataclass(frozen=True)
class BlrmParams:
    log_alpha1: float
    log_beta1: float
    log_alpha2: float
    log_beta2: float
    eta: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.log_alpha1, self.log_beta1, self.log_alpha2, self.log_beta2, self.eta])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "BlrmParams":
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class BlrmPrior:
    """Weakly informative prior: BVN on each drug's (log alpha, log beta),
    normal on the interaction."""

    mu_alpha_a: float
    mu_alpha_b: float
    cov_a: np.ndarray
    cov_b: np.ndarray
    eta_sd: float
    mu_beta_a: float = 0.0
    mu_beta_b: float = 0.0

    def __post_init__(self) -> None:
        for name in ("cov_a", "cov_b"):
            cov = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, cov)
            if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
                raise ValueError(f"{name} must be a symmetric 2x2 matrix")
            if np.any(np.linalg.eigvalsh(cov) <= 0):
                raise ValueError(f"{name} must be positive definite")
        if self.eta_sd <= 0:
            raise ValueError("eta_sd must be positive")

    @classmethod
    def default(cls, anticipated_top_rate: float = 0.33, eta_sd: float = 1.121) -> "BlrmPrior":
        mu = logit(anticipated_top_rate)
        cov = np.diag([2.0, 1.0])
        return cls(mu_alpha_a=mu, mu_alpha_b=mu, cov_a=cov, cov_b=cov, eta_sd=eta_sd)


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 2000
    draws: int = 4000
    initial_scale: float = 0.5
    target_accept: float = 0.3
    adapt_interval: int = 50

    def __post_init__(self) -> None:
        if self.burn_in < 0 or self.draws < 1:
            raise ValueError("need burn_in >= 0 and draws >= 1")


@dataclass(frozen=True)
class BlrmFit:
    draws: np.ndarray
    mean_surface: np.ndarray
    accept_rate: float
    effective_draws: float


class FitError(RuntimeError):
    pass


def _logit_surface(vec: np.ndarray, scaled_a: np.ndarray, scaled_b: np.ndarray) -> np.ndarray:
    a1 = math.exp(vec[0])
    b1 = math.exp(vec[1])
    a2 = math.exp(vec[2])
    b2 = math.exp(vec[3])
    ta = a1 * scaled_a ** b1
    tb = a2 * scaled_b ** b2
    combined = ta[:, None] + tb[None, :] + ta[:, None] * tb[None, :]
    return np.log(combined) + vec[4] * scaled_a[:, None] * scaled_b[None, :]


def tox_surface(params: BlrmParams, scaled_a: np.ndarray, scaled_b: np.ndarray) -> np.ndarray:
    """DLT probability at every combination under one parameter draw."""
    if np.any(scaled_a <= 0) or np.any(scaled_a > 1) or np.any(scaled_b <= 0) or np.any(scaled_b > 1):
        raise ValueError("scaled doses must lie in (0, 1]")
    z = _logit_surface(params.as_vector(), scaled_a, scaled_b)
    return 1.0 / (1.0 + np.exp(-z))


class _Posterior:
    """Log posterior specialized to one data set, cheap to evaluate per step."""

    def __init__(self, prior: BlrmPrior, data: TrialState, grid: DoseGrid, mask: SubsetMask):
        scaled_a, scaled_b = dose_rescale(grid)
        cells = sorted(data.treated_cells())
        for cell in cells:
            if cell not in mask:
                raise ValueError(f"data at {cell} outside the admissible subset")
        self.scaled_a = scaled_a
        self.scaled_b = scaled_b
        self.sa = np.array([scaled_a[i - 1] for i, _ in cells])
        self.sb = np.array([scaled_b[j - 1] for _, j in cells])
        self.sab = self.sa * self.sb
        self.n = np.array([data.n_at(c) for c in cells], dtype=float)
        self.y = np.array([data.y_at(c) for c in cells], dtype=float)
        self.log_choose = float(
            sum(
                math.lgamma(n + 1) - math.lgamma(y + 1) - math.lgamma(n - y + 1)
                for n, y in zip(self.n, self.y)
            )
        )
        self.prior_mean = np.array(
            [prior.mu_alpha_a, prior.mu_beta_a, prior.mu_alpha_b, prior.mu_beta_b, 0.0]
        )
        prec = np.zeros((5, 5))
        prec[0:2, 0:2] = np.linalg.inv(prior.cov_a)
        prec[2:4, 2:4] = np.linalg.inv(prior.cov_b)
        prec[4, 4] = 1.0 / prior.eta_sd**2
        self.precision = prec
        self.prior_logdet = (
            math.log(np.linalg.det(prior.cov_a))
            + math.log(np.linalg.det(prior.cov_b))
            + 2.0 * math.log(prior.eta_sd)
        )

    def log_prior(self, vec: np.ndarray) -> float:
        d = vec - self.prior_mean
        quad = float(d @ self.precision @ d)
        return -0.5 * (quad + self.prior_logdet + 5.0 * math.log(2.0 * math.pi))

    def log_likelihood(self, vec: np.ndarray) -> float:
        if len(self.n) == 0:
            return 0.0
        a1 = math.exp(vec[0])
        b1 = math.exp(vec[1])
        a2 = math.exp(vec[2])
        b2 = math.exp(vec[3])
        ta = a1 * self.sa**b1
        tb = a2 * self.sb**b2
        z = np.log(ta + tb + ta * tb) + vec[4] * self.sab
        # y*log(pi) + (n-y)*log(1-pi) == y*z - n*log(1+e^z)
        return self.log_choose + float(np.sum(self.y * z - self.n * np.logaddexp(0.0, z)))

    def __call__(self, vec: np.ndarray) -> float:
        return self.log_prior(vec) + self.log_likelihood(vec)


def log_posterior(
    params: BlrmParams,
    prior: BlrmPrior,
    data: TrialState,
    grid: DoseGrid,
    mask: SubsetMask,
) -> float:
    """Unnormalized-in-data, fully-constant-carrying log posterior density."""
    return _Posterior(prior, data, grid, mask)(params.as_vector())


def fit(
    prior: BlrmPrior,
    data: TrialState,
    grid: DoseGrid,
    mask: SubsetMask,
    mcmc: McmcConfig,
    seed: int,
) -> BlrmFit:
    """Sample the posterior and average the toxicity surface over kept draws.

    Deterministic for a given seed. The proposal is a diagonal Gaussian whose
    per-coordinate widths follow the prior scales; a single scalar multiplier
    adapts during burn-in toward the target acceptance rate, then freezes.
    """
    posterior = _Posterior(prior, data, grid, mask)
    rng = np.random.default_rng(seed)
    widths = np.array(
        [
            math.sqrt(posterior.precision[0, 0] ** -1),
            math.sqrt(posterior.precision[1, 1] ** -1),
            math.sqrt(posterior.precision[2, 2] ** -1),
            math.sqrt(posterior.precision[3, 3] ** -1),
            math.sqrt(posterior.precision[4, 4] ** -1),
        ]
    )
    current = posterior.prior_mean.copy()
    lp = posterior(current)
    if not math.isfinite(lp):
        raise FitError("log posterior not finite at the prior mean")

    scale = mcmc.initial_scale
    surface_sum = np.zeros((grid.n_levels_a, grid.n_levels_b))
    kept = np.empty((mcmc.draws, 5))
    kept_top_logit = np.empty(mcmc.draws)
    accepted_after_adapt = 0
    window_accepts = 0

    total = mcmc.burn_in + mcmc.draws
    for step in range(total):
        proposal = current + scale * widths * rng.standard_normal(5)
        lp_new = posterior(proposal)
        if math.log(rng.random()) < lp_new - lp:
            current = proposal
            lp = lp_new
            window_accepts += 1
            if step >= mcmc.burn_in:
                accepted_after_adapt += 1
        in_burn_in = step < mcmc.burn_in
        if in_burn_in and (step + 1) % mcmc.adapt_interval == 0:
            rate = window_accepts / mcmc.adapt_interval
            scale = float(np.clip(scale * math.exp(0.9 * (rate - mcmc.target_accept)), 1e-3, 10.0))
            window_accepts = 0
        if not in_burn_in:
            k = step - mcmc.burn_in
            kept[k] = current
            z = _logit_surface(current, posterior.scaled_a, posterior.scaled_b)
            surface_sum += 1.0 / (1.0 + np.exp(-z))
            kept_top_logit[k] = z[-1, -1]

    mean_surface = surface_sum / mcmc.draws
    return BlrmFit(
        draws=kept,
        mean_surface=mean_surface,
        accept_rate=accepted_after_adapt / mcmc.draws,
        effective_draws=_effective_draws(kept_top_logit),
    )


def _effective_draws(series: np.ndarray) -> float:
    """Crude lag-1 autoregressive effective sample size."""
    k = len(series)
    if k < 3:
        return float(k)
    centered = series - series.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return float(k)
    rho = float(centered[:-1] @ centered[1:]) / denom
    rho = min(max(rho, -0.9999), 0.9999)
    return k * (1.0 - rho) / (1.0 + rho)
