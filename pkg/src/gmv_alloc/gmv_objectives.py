"""Utility moments and the generalized mean-variance (GMV) score.

GMV ranks a decision by ``E[U] - lam/2 * Var[U]``; ``lam = 0`` is plain
expected-utility maximization. Closed forms are provided for linear, CARA,
log and CRRA utilities under Gaussian/lognormal outcomes whose location is
itself Gaussian and whose variance may be Gamma distributed.

CARA moments all derive from the Laplace transform ``m(k) = E[exp(-k*a*x)]``:
``E[U] = (1 - m(1))/a`` and ``Var[U] = (m(2) - m(1)**2)/a**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._numerics import safeguarded_root
from .errors import DomainError, LogDomainError
from .market_model import Family, ReturnModel


class UtilityKind(str, Enum):
    LINEAR = "linear"
    LOG = "log"
    CARA = "cara"
    CRRA = "crra"


@dataclass(frozen=True)
class UtilitySpec:
    kind: UtilityKind
    a: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        kind = UtilityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is UtilityKind.CARA and not (self.a is not None and self.a > 0):
            raise DomainError("CARA utility needs a > 0")
        if kind is UtilityKind.CRRA:
            if self.gamma is None or not self.gamma > 0 or self.gamma == 1:
                raise DomainError("CRRA utility needs gamma > 0 and gamma != 1 (use LOG for gamma = 1)")

    @classmethod
    def linear(cls):
        return cls(UtilityKind.LINEAR)

    @classmethod
    def log(cls):
        return cls(UtilityKind.LOG)

    @classmethod
    def cara(cls, a):
        return cls(UtilityKind.CARA, a=a)

    @classmethod
    def crra(cls, gamma):
        return cls(UtilityKind.CRRA, gamma=gamma)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is UtilityKind.LINEAR:
            return x
        if self.kind is UtilityKind.LOG:
            return np.log(x)
        if self.kind is UtilityKind.CARA:
            return -np.expm1(-self.a * x) / self.a
        c = 1.0 - self.gamma
        return np.expm1(c * np.log(x)) / c


@dataclass(frozen=True)
class GmvParams:
    utility: UtilitySpec
    lam: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError("lambda must be non-negative")
        if not self.T > 0:
            raise DomainError("T must be positive")


@dataclass(frozen=True)
class MomentPair:
    """Mean and variance of a utility. Rounding noise below 1e-12 is clipped to zero."""

    mean: float
    var: float

    def __post_init__(self):
        var = float(self.var)
        if var < 0:
            if var >= -1e-12 * max(1.0, abs(self.mean)):
                var = 0.0
            else:
                raise DomainError(f"negative variance {var:.3e}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "var", var)


@dataclass(frozen=True)
class Gamble:
    outcomes: np.ndarray
    probs: np.ndarray
    ce: float
    sigma0_2: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.outcomes, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if x.ndim != 1 or x.shape != p.shape or x.size < 2:
            raise DomainError("outcomes and probs must be equal-length vectors of length >= 2")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("probabilities must be non-negative and sum to 1")
        if not self.sigma0_2 >= 0:
            raise DomainError("sigma0_2 must be non-negative")
        object.__setattr__(self, "outcomes", x)
        object.__setattr__(self, "probs", p)

    @property
    def mean(self) -> float:
        return float(self.probs @ self.outcomes)

    @property
    def var(self) -> float:
        return float(self.probs @ (self.outcomes - self.mean) ** 2)

    def to_dict(self) -> dict:
        return {
            "outcomes": self.outcomes.tolist(),
            "probs": self.probs.tolist(),
            "ce": self.ce,
            "sigma0_2": self.sigma0_2,
        }


def gmv_score(m: MomentPair, lam: float) -> float:
    return m.mean - 0.5 * lam * m.var


def linear_moments(mu0: float, sigma2: float, sigma0_2: float = 0.0) -> MomentPair:
    """Linear utility under an uncertain mean: total variance adds both layers."""
    return MomentPair(mu0, sigma2 + sigma0_2)


def _moments_from_log_laplace(log_m1: float, log_m2: float, a: float) -> MomentPair:
    mean = -math.expm1(log_m1) / a
    # m2 - m1^2 = m1^2 * (exp(log_m2 - 2 log_m1) - 1)
    var = math.exp(2 * log_m1) * math.expm1(log_m2 - 2 * log_m1) / a**2
    return MomentPair(mean, var)


def cara_moments_uni(
    mu0: float,
    sigma: float,
    a: float,
    w: float,
    sigma0: float = 0.0,
    alpha: float | None = None,
) -> MomentPair:
    """Moments of ``U_a(w*X)`` for a single Gaussian asset.

    ``sigma0 > 0`` marginalizes a Gaussian location ``mu ~ N(mu0, sigma0**2)``.
    Passing ``alpha`` switches to a Gamma-distributed variance
    ``s**2 ~ Gamma(alpha/2, scale=2*sigma**2/alpha)``; the variance moment
    then requires ``alpha > 4*a**2*w**2*sigma**2``.
    """
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    s2, s02 = sigma**2, sigma0**2
    aw = a * w
    if alpha is None:
        total = s2 + s02
        log_m = [-k * aw * mu0 + 0.5 * (k * aw) ** 2 * total for k in (1, 2)]
    else:
        if not alpha > 0:
            raise DomainError("alpha must be positive")
        bound = 4 * aw**2 * s2
        if not alpha > bound:
            raise DomainError(
                f"variance-moment undefined: need alpha > 4 a^2 w^2 sigma^2 = {bound:.6g}, got alpha = {alpha:.6g}"
            )
        log_m = [
            -k * aw * mu0 + 0.5 * (k * aw) ** 2 * s02 - 0.5 * alpha * math.log1p(-((k * aw) ** 2) * s2 / alpha)
            for k in (1, 2)
        ]
    return _moments_from_log_laplace(log_m[0], log_m[1], a)


def _risk_argument(model: ReturnModel, a: float, w: np.ndarray, k: float = 1.0):
    """Argument of the log risk term (1.0 for the Gaussian family)."""
    quad = float(w @ model.Sigma @ w)
    if model.family is Family.WISHART:
        return 1.0 - (k * a) ** 2 / model.alpha * quad, quad
    if model.family is Family.ALD:
        return 1.0 - 0.5 * (k * a) ** 2 * quad + k * a * float(model.mu_a @ w), quad
    return 1.0, quad


def _check_domain(model, a, w, k=1.0):
    arg, quad = _risk_argument(model, a, w, k)
    if not arg > 0:
        raise LogDomainError(
            f"log-domain violated for {model.family.value} family: risk argument {arg:.6g} "
            f"(w'Sigma w = {quad:.6g})",
            value=quad,
        )
    return arg, quad


def _log_laplace_multi(model: ReturnModel, a: float, w: np.ndarray, k: float) -> float:
    """log E[exp(-k*a*x)] for the outcome x = (1 - sum w) r0 + w'r."""
    ka = k * a
    cash = (1.0 - w.sum()) * model.r0
    base = -ka * (cash + float(model.mu0 @ w)) + 0.5 * ka**2 * float(w @ model.Sigma0 @ w)
    arg, quad = _check_domain(model, a, w, k)
    if model.family is Family.GAUSSIAN:
        return base + 0.5 * ka**2 * quad
    if model.family is Family.WISHART:
        return base - 0.5 * model.alpha * math.log(arg)
    return base - math.log(arg)


def cara_objective_multi(model: ReturnModel, a: float, w) -> float:
    """Certainty equivalent ``-(1/a) log E[exp(-a x)]`` of the portfolio outcome.

    Maximizing it is equivalent to maximizing expected CARA utility.
    """
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    w = np.asarray(w, dtype=float)
    return -_log_laplace_multi(model, a, w, 1.0) / a


def cara_moments_multi(model: ReturnModel, a: float, w) -> MomentPair:
    """E[U_a] and Var[U_a] of the multivariate portfolio outcome.

    Reported for diagnostics only: the variance term is not concave in ``w``,
    so allocators optimize the expected utility alone.
    """
    w = np.asarray(w, dtype=float)
    return _moments_from_log_laplace(
        _log_laplace_multi(model, a, w, 1.0), _log_laplace_multi(model, a, w, 2.0), a
    )


def cara_gradient_multi(model: ReturnModel, a: float, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    arg, _ = _check_domain(model, a, w)
    sw = model.Sigma @ w
    g = model.excess - a * (model.Sigma0 @ w)
    if model.family is Family.GAUSSIAN:
        return g - a * sw
    if model.family is Family.WISHART:
        return g - a * sw / arg
    return g + (model.mu_a - a * sw) / arg


def cara_hessian_multi(model: ReturnModel, a: float, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    arg, _ = _check_domain(model, a, w)
    sw = model.Sigma @ w
    h = -a * model.Sigma0
    if model.family is Family.GAUSSIAN:
        return h - a * model.Sigma
    if model.family is Family.WISHART:
        return h - a * model.Sigma / arg - (2 * a**3 / model.alpha) * np.outer(sw, sw) / arg**2
    u = model.mu_a - a * sw
    return h - a * model.Sigma / arg - a * np.outer(u, u) / arg**2


def log_utility_moments(mu_ln: float, sigma_ln2: float, sigma0_ln2: float = 0.0, alpha: float | None = None) -> MomentPair:
    """Moments of ``ln X`` for lognormal ``X``.

    A Gamma-mixed variance (any ``alpha``) leaves both moments unchanged, so
    ``alpha`` is accepted and validated but does not enter the result.
    """
    if not (sigma_ln2 >= 0 and sigma0_ln2 >= 0):
        raise DomainError("variances must be non-negative")
    if alpha is not None and not alpha > 0:
        raise DomainError("alpha must be positive")
    return MomentPair(mu_ln, sigma_ln2 + sigma0_ln2)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(96)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def crra_moments(mu_ln: float, sigma_ln2: float, sigma0_ln2: float, gamma: float) -> MomentPair:
    """Moments of CRRA utility ``(X**(1-gamma) - 1)/(1-gamma)`` for lognormal ``X``.

    With an uncertain log-location (``sigma0_ln2 > 0``) the variance is
    assembled from the law of total variance over ``mu ~ N(mu_ln, sigma0_ln2)``
    by Gauss-Hermite quadrature.
    """
    if not gamma > 0 or gamma == 1:
        raise DomainError("gamma must be positive and != 1; use log_utility_moments for gamma = 1")
    if not (sigma_ln2 >= 0 and sigma0_ln2 >= 0):
        raise DomainError("variances must be non-negative")
    c = 1.0 - gamma
    total = sigma_ln2 + sigma0_ln2
    mean = math.expm1(c * mu_ln + 0.5 * c**2 * total) / c
    if sigma0_ln2 == 0:
        var = math.exp(2 * c * mu_ln + c**2 * sigma_ln2) * math.expm1(c**2 * sigma_ln2) / c**2
        return MomentPair(mean, var)
    mus = mu_ln + math.sqrt(sigma0_ln2) * _GH_NODES
    # E[X^c | mu] and Var[X^c | mu] for the inner lognormal
    cond_mean = np.exp(c * mus + 0.5 * c**2 * sigma_ln2)
    cond_var = np.exp(2 * c * mus + c**2 * sigma_ln2) * math.expm1(c**2 * sigma_ln2)
    outer_mean = float(_GH_WEIGHTS @ cond_mean)
    var = (float(_GH_WEIGHTS @ cond_var) + float(_GH_WEIGHTS @ (cond_mean - outer_mean) ** 2)) / c**2
    return MomentPair(mean, var)


def taylor_gmv(value_at_mean, gradient, hessian, Sigma, lam) -> float:
    """Second-order (delta-method) GMV of a smooth utility of a Gaussian vector."""
    g = np.atleast_1d(np.asarray(gradient, dtype=float))
    h = np.atleast_2d(np.asarray(hessian, dtype=float))
    s = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if np.max(np.abs(h - h.T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise DomainError("hessian must be symmetric")
    hs = h @ s
    mean = value_at_mean + 0.5 * np.trace(hs)
    var = g @ s @ g + 0.5 * np.trace(hs @ hs)
    return float(mean - 0.5 * lam * var)


class CeFamily(str, Enum):
    GAUSSIAN = "gaussian"
    ALD = "ald"
    GAMMA_VAR = "gamma_var"


_A_MIN = 1e-6


def calibrate_risk_aversion(
    g: Gamble,
    family: CeFamily | str = CeFamily.GAUSSIAN,
    mu_a: float = 0.0,
    alpha: float | None = None,
) -> float:
    """CARA risk aversion that makes the gamble's certainty equivalent equal ``g.ce``.

    ``gaussian`` uses the closed form ``2 (mu_c - x_c) / (sigma_c^2 + sigma0^2)``.
    ``ald`` matches the gamble's mean and variance with an asymmetric Laplace
    law of asymmetry ``mu_a`` (location ``mu_c - mu_a``, scale variance
    ``sigma_c^2 - mu_a^2``). ``gamma_var`` mixes the variance with a Gamma law
    of shape ``alpha/2``. Both are solved by safeguarded root finding.
    """
    family = CeFamily(family)
    mu_c, var_c, x_c, s02 = g.mean, g.var, g.ce, g.sigma0_2
    if not x_c < mu_c:
        raise DomainError(f"risk-seeking gamble: CE {x_c} is not below the mean {mu_c}")
    if family is CeFamily.GAUSSIAN:
        if not var_c + s02 > 0:
            raise DomainError("gamble has zero variance")
        return 2.0 * (mu_c - x_c) / (var_c + s02)

    if family is CeFamily.ALD:
        loc = mu_c - mu_a
        s2 = var_c - mu_a**2
        if not s2 > 0:
            raise DomainError("CE infeasible for family ald: mu_a^2 exceeds the gamble variance")
        a_max = (mu_a + math.sqrt(mu_a**2 + 2 * s2)) / s2

        def ce(a):
            return loc - 0.5 * a * s02 + math.log(1 - 0.5 * a * a * s2 + a * mu_a) / a

        def dce(a):
            arg = 1 - 0.5 * a * a * s2 + a * mu_a
            return -0.5 * s02 - math.log(arg) / a**2 + (mu_a - a * s2) / (a * arg)

    else:
        if alpha is None or not alpha > 0:
            raise DomainError("gamma_var family needs alpha > 0")
        a_max = math.sqrt(alpha / var_c)

        def ce(a):
            return mu_c - 0.5 * a * s02 + 0.5 * alpha / a * math.log1p(-a * a * var_c / alpha)

        def dce(a):
            arg = 1 - a * a * var_c / alpha
            return -0.5 * s02 - 0.5 * alpha / a**2 * math.log(arg) - var_c / arg

    hi = a_max * (1 - 1e-12)
    try:
        return safeguarded_root(lambda a: ce(a) - x_c, _A_MIN, hi, dfn=dce)
    except DomainError:
        raise DomainError(f"CE infeasible for family {family.value}: no root in [{_A_MIN}, {hi:.6g}]") from None
