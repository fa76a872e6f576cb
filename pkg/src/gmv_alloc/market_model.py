"""Return-distribution parameters, conjugate drift updates and horizon variance laws.

The drift of an asset is treated as uncertain: a Gaussian posterior
``N(mu_pd, sigma_pd2)`` for its starting value, optionally diffusing over time
at rate ``sigma_mu2`` (a local-level model). Over a holding period ``T`` this
adds ``sigma_pd2 * T**2`` and ``sigma_mu2 * T**3 / 3`` to the diffusive
variance ``sigma2 * T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._numerics import cho_factor, spd_inverse, symmetrize
from .errors import DomainError

# Stand-in for an infinite (flat) prior variance.
FLAT_PRIOR_VAR = 1e12


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    WISHART = "wishart"
    ALD = "ald"


def _frozen_array(x, ndim: int) -> np.ndarray:
    a = np.array(x, dtype=float, copy=True)
    if ndim == 1:
        a = np.atleast_1d(a)
    else:
        a = np.atleast_2d(a)
    if a.ndim != ndim:
        raise DomainError(f"expected a {ndim}-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("array contains non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReturnModel:
    """Next-period return model for ``N`` risky assets and cash.

    ``Sigma`` is the covariance (Gaussian), the Wishart scale (``S ~ W(alpha, Sigma/alpha)``)
    or the ALD scale matrix. ``Sigma0`` is the diagonal covariance of the
    uncertain location ``mu ~ N(mu0, Sigma0)``. ``mu_a`` is the ALD asymmetry
    vector and ``alpha`` the Wishart degrees of freedom (``inf`` otherwise).
    """

    family: Family
    mu0: np.ndarray
    Sigma: np.ndarray
    Sigma0: np.ndarray | None = None
    mu_a: np.ndarray | None = None
    alpha: float = math.inf
    r0: float = 0.0

    def __post_init__(self):
        fam = Family(self.family)
        mu0 = _frozen_array(self.mu0, 1)
        n = mu0.size
        sigma = symmetrize(self.Sigma)
        if sigma.shape != (n, n):
            raise DomainError(f"Sigma must be {n}x{n}, got {sigma.shape}")
        cho_factor(sigma)  # raises NumericalError if not SPD
        sigma.setflags(write=False)
        if self.Sigma0 is None:
            sigma0 = np.zeros((n, n))
        else:
            sigma0 = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
            if sigma0.shape == (1, n) or sigma0.ndim == 1:
                sigma0 = np.diag(np.ravel(sigma0))
        if sigma0.shape != (n, n):
            raise DomainError(f"Sigma0 must be {n}x{n}, got {sigma0.shape}")
        if np.any(sigma0 - np.diag(np.diag(sigma0))):
            raise DomainError("Sigma0 must be diagonal")
        if np.any(np.diag(sigma0) < 0):
            raise DomainError("Sigma0 entries must be non-negative")
        sigma0 = _frozen_array(sigma0, 2)
        mu_a = _frozen_array(np.zeros(n) if self.mu_a is None else self.mu_a, 1)
        if mu_a.size != n:
            raise DomainError(f"mu_a must have length {n}")
        if fam is not Family.ALD and np.any(mu_a):
            raise DomainError("mu_a must be zero unless family is ALD")
        alpha = float(self.alpha)
        if fam is Family.WISHART:
            if not (alpha > 0 and math.isfinite(alpha)):
                raise DomainError("Wishart family needs a finite alpha > 0")
        elif math.isfinite(alpha):
            raise DomainError("alpha is only meaningful for the Wishart family")
        if not math.isfinite(self.r0):
            raise DomainError("r0 must be finite")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma", sigma)
        object.__setattr__(self, "Sigma0", sigma0)
        object.__setattr__(self, "mu_a", mu_a)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "r0", float(self.r0))

    @classmethod
    def gaussian(cls, mu0, Sigma, Sigma0=None, r0=0.0) -> "ReturnModel":
        return cls(Family.GAUSSIAN, mu0, Sigma, Sigma0=Sigma0, r0=r0)

    @classmethod
    def wishart(cls, mu0, Sigma, alpha, Sigma0=None, r0=0.0) -> "ReturnModel":
        return cls(Family.WISHART, mu0, Sigma, Sigma0=Sigma0, alpha=alpha, r0=r0)

    @classmethod
    def ald(cls, mu0, Sigma, mu_a, Sigma0=None, r0=0.0) -> "ReturnModel":
        return cls(Family.ALD, mu0, Sigma, Sigma0=Sigma0, mu_a=mu_a, r0=r0)

    @property
    def n_assets(self) -> int:
        return self.mu0.size

    @property
    def excess(self) -> np.ndarray:
        return self.mu0 - self.r0

    @property
    def has_drift_uncertainty(self) -> bool:
        return bool(np.any(self.Sigma0))

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "mu0": self.mu0.tolist(),
            "Sigma": self.Sigma.tolist(),
            "Sigma0": self.Sigma0.tolist(),
            "mu_a": self.mu_a.tolist(),
            "alpha": self.alpha if math.isfinite(self.alpha) else None,
            "r0": self.r0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReturnModel":
        _reject_unknown(d, {"family", "mu0", "Sigma", "Sigma0", "mu_a", "alpha", "r0"}, "ReturnModel")
        alpha = d.get("alpha")
        return cls(
            Family(d["family"]),
            d["mu0"],
            d["Sigma"],
            Sigma0=d.get("Sigma0"),
            mu_a=d.get("mu_a"),
            alpha=math.inf if alpha is None else alpha,
            r0=d.get("r0", 0.0),
        )


@dataclass(frozen=True)
class PosteriorBelief:
    """Posterior of the drift and its diffusion rate.

    ``sigma_mu2`` has units of variance per period cubed; ``n_eff`` is the
    (possibly fractional) observation count used in the update.
    """

    mu_pd: float
    sigma_pd2: float
    sigma_mu2: float = 0.0
    n_eff: float = 1.0

    def __post_init__(self):
        if not (self.sigma_pd2 >= 0 and self.sigma_mu2 >= 0):
            raise DomainError("posterior variances must be non-negative")
        if not self.n_eff > 0:
            raise DomainError("n_eff must be positive")

    def to_dict(self) -> dict:
        return {
            "mu_pd": self.mu_pd,
            "sigma_pd2": self.sigma_pd2,
            "sigma_mu2": self.sigma_mu2,
            "n_eff": self.n_eff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorBelief":
        _reject_unknown(d, {"mu_pd", "sigma_pd2", "sigma_mu2", "n_eff"}, "PosteriorBelief")
        return cls(**d)


@dataclass(frozen=True)
class HorizonSpec:
    """Holding horizon ``T`` starting after ``t0`` elapsed periods, discretized by ``dt``."""

    T: float
    dt: float | None = field(default=None)
    t0: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("horizon T must be positive")
        dt = self.T if self.dt is None else self.dt
        if not 0 < dt <= self.T:
            raise DomainError("dt must satisfy 0 < dt <= T")
        if not self.t0 >= 0:
            raise DomainError("t0 must be non-negative")
        object.__setattr__(self, "dt", float(dt))

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def to_dict(self) -> dict:
        return {"T": self.T, "dt": self.dt, "t0": self.t0}

    @classmethod
    def from_dict(cls, d: dict) -> "HorizonSpec":
        _reject_unknown(d, {"T", "dt", "t0"}, "HorizonSpec")
        return cls(**d)


def _reject_unknown(d: dict, allowed: set[str], name: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise DomainError(f"unknown field(s) for {name}: {sorted(extra)}")


def _prior_var(v: float) -> float:
    return FLAT_PRIOR_VAR if math.isinf(v) else min(float(v), FLAT_PRIOR_VAR)


def posterior_update_uni(prior_mean, prior_var, sample_mean, obs_var, n):
    """Normal-normal update of an unknown mean with known observation variance.

    An infinite ``prior_var`` is capped at ``FLAT_PRIOR_VAR``. ``n`` may be a
    fractional effective count to discount stale observations.

    Returns
    -------
    (mu_pd, sigma_pd2)
    """
    if not (prior_var > 0 and obs_var > 0 and n > 0):
        raise DomainError("prior_var, obs_var and n must be positive")
    pv = _prior_var(prior_var)
    sigma_pd2 = 1.0 / (1.0 / pv + n / obs_var)
    mu_pd = sigma_pd2 * (prior_mean / pv + n * sample_mean / obs_var)
    return mu_pd, sigma_pd2


def posterior_update_multi(prior_mean, prior_cov, sample_mean, obs_cov, n):
    """Multivariate analogue of :func:`posterior_update_uni` (precisions add)."""
    if not n > 0:
        raise DomainError("n must be positive")
    prior_mean = np.atleast_1d(np.asarray(prior_mean, dtype=float))
    sample_mean = np.atleast_1d(np.asarray(sample_mean, dtype=float))
    prior_cov = symmetrize(prior_cov)
    obs_cov = symmetrize(obs_cov)
    k = prior_mean.size
    if prior_cov.shape != (k, k) or obs_cov.shape != (k, k) or sample_mean.size != k:
        raise DomainError("inconsistent dimensions in posterior update")
    prior_prec = spd_inverse(prior_cov)
    obs_prec = spd_inverse(obs_cov)
    post_prec = prior_prec + n * obs_prec
    sigma_pd = spd_inverse(post_prec)
    mu_pd = sigma_pd @ (prior_prec @ prior_mean + n * obs_prec @ sample_mean)
    return mu_pd, sigma_pd


def horizon_return_moments(belief: PosteriorBelief, obs_var: float, horizon: HorizonSpec):
    """Mean and variance of the price change over ``horizon``.

    For a start at ``t0 = 0`` the variance is
    ``obs_var*T + sigma_pd2*T**2 + sigma_mu2*T**3/3``; a later start adds the
    drift diffusion accumulated so far, ``sigma_mu2*t0*T**2``.
    """
    if not obs_var > 0:
        raise DomainError("obs_var must be positive")
    T, t0 = horizon.T, horizon.t0
    mean = belief.mu_pd * T
    var = (
        obs_var * T
        + belief.sigma_pd2 * T**2
        + belief.sigma_mu2 * (t0 * T**2 + T**3 / 3.0)
    )
    return mean, var


def discrete_horizon_variance(belief: PosteriorBelief, obs_var: float, t: float, dt: float) -> float:
    """Exact terminal variance of the Euler-discretized process after ``n = t/dt`` steps."""
    n = int(round(t / dt))
    if n < 1 or abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise DomainError("t must be a positive multiple of dt")
    return (
        obs_var * n * dt
        + (n * dt) ** 2 * belief.sigma_pd2
        + belief.sigma_mu2 * dt**3 * n * (n - 1) * (2 * n - 1) / 6.0
    )


def mv_weight_nonstationary(belief: PosteriorBelief, obs_var: float, r0: float, a: float, T: float) -> float:
    """Single-asset CARA weight using the per-period variance of the horizon law."""
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    if not T > 0:
        raise DomainError("T must be positive")
    denom = obs_var + belief.sigma_pd2 * T + belief.sigma_mu2 * T**2 / 3.0
    if not denom > 0:
        raise DomainError("effective variance must be positive")
    return (belief.mu_pd - r0) / (a * denom)


def drift_uncertainty_diag(beliefs, T: float) -> np.ndarray:
    """Diagonal ``Sigma0`` for a multi-asset model from per-asset beliefs.

    Each entry is the excess of the per-period horizon variance over the
    diffusive part, ``sigma_pd2*T + sigma_mu2*T**2/3``, so that a one-asset
    Gaussian allocation with this ``Sigma0`` reproduces
    :func:`mv_weight_nonstationary`.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    return np.diag([b.sigma_pd2 * T + b.sigma_mu2 * T**2 / 3.0 for b in beliefs])
