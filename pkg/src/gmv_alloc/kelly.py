"""Optimal leverage from the GMV of log wealth.

The risky leg is a GBM with excess drift ``e = mu_r - r0`` and variance
``sigma_r2``; an uncertain drift adds ``sigma0_2`` per period squared, and an
optional Gamma-distributed variance has noise scale ``alpha``. Leverage
``f`` multiplies the risky leg, so log wealth over ``T`` periods has

    mean  (r0 + f e - f^2 S / 2) T,     S = sigma_r2 + sigma0_2 T
    var   f^2 S T  [+ f^4 sigma_r2^2 T^2 / (2 alpha)]

Also covers binary bets (known and Beta-Binomial predictive odds), CRRA
leverage and the final weight combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._numerics import grid_refine_max, newton_polish, safeguarded_root
from .errors import DomainError
from .gmv_objectives import MomentPair, crra_moments, gmv_score

BOUNDARY_SHRINK = 1e-9

NO_FAVORABLE_LEVERAGE = "no_favorable_leverage"
UNFAVORABLE_GAME = "unfavorable_game"
UNFAVORABLE_PREDICTIVE_ODDS = "unfavorable_predictive_odds"
UNBOUNDED_LEVERAGE = "unbounded_leverage"


class Method(str, Enum):
    CLOSED_FORM = "closed_form"
    ROOT_FIND = "root_find"
    GRID_REFINE = "grid_refine"


@dataclass(frozen=True)
class LeverageInputs:
    mu_r: float
    sigma_r2: float
    r0: float = 0.0
    sigma0_2: float = 0.0
    alpha: float | None = None
    T: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.sigma_r2 > 0:
            raise DomainError("sigma_r2 must be positive")
        if not self.T > 0:
            raise DomainError("horizon T must be positive")
        if not self.lam >= 0:
            raise DomainError("lambda must be non-negative")
        if not self.sigma0_2 >= 0:
            raise DomainError("sigma0_2 must be non-negative")
        if self.alpha is not None and not self.alpha > 0:
            raise DomainError("alpha must be positive")

    @property
    def excess(self) -> float:
        return self.mu_r - self.r0

    @property
    def total_var(self) -> float:
        """Per-period variance including the drift-uncertainty contribution over the horizon."""
        return self.sigma_r2 + self.sigma0_2 * self.T

    def to_dict(self) -> dict:
        return {
            "mu_r": self.mu_r,
            "sigma_r2": self.sigma_r2,
            "r0": self.r0,
            "sigma0_2": self.sigma0_2,
            "alpha": self.alpha,
            "T": self.T,
            "lambda": self.lam,
        }

    @classmethod
    def from_allocation(cls, result, r0: float, T: float = 1.0, lam: float = 0.0, alpha=None) -> "LeverageInputs":
        """Treat an allocated portfolio as the single risky asset to lever."""
        return cls(r0 + result.mu_p, result.sigma_p2, r0, result.sigma0_p2, alpha, T, lam)


@dataclass(frozen=True)
class LeverageResult:
    f_star: float
    objective: float
    mean_logw: float
    var_logw: float
    method: Method
    flags: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "f_star": self.f_star,
            "objective": self.objective,
            "mean_logw": self.mean_logw,
            "var_logw": self.var_logw,
            "method": self.method.value,
            "flags": list(self.flags),
            "diagnostics": dict(self.diagnostics),
        }


def _result(f, moments: MomentPair, lam, method, flags=(), **diag) -> LeverageResult:
    return LeverageResult(float(f), gmv_score(moments, lam), moments.mean, moments.var, method, tuple(flags), diag)


# -- continuous GBM ---------------------------------------------------------------


def gbm_log_moments(inputs: LeverageInputs, f: float) -> MomentPair:
    """Mean and variance of ``ln(X_T / X_0)`` at leverage ``f`` (finite-variance part only)."""
    s = inputs.total_var
    T = inputs.T
    mean = (inputs.r0 + f * inputs.excess - 0.5 * f * f * s) * T
    var = f * f * s * T
    return MomentPair(mean, var)


def lognormal_wealth_mean_mode(mu: float, sigma2: float, T: float) -> tuple[float, float]:
    """Mean ``e^{mu T}`` and mode ``e^{(mu - 3 sigma2 / 2) T}`` of GBM wealth per unit start."""
    return math.exp(mu * T), math.exp((mu - 1.5 * sigma2) * T)


def kelly_gmv(inputs: LeverageInputs) -> LeverageResult:
    """``f* = e / ((1 + lambda) S)``: full Kelly at ``lambda = 0``, half Kelly at ``lambda = 1``."""
    f = inputs.excess / ((1.0 + inputs.lam) * inputs.total_var)
    return _result(f, gbm_log_moments(inputs, f), inputs.lam, Method.CLOSED_FORM)


def uncertain_variance_log_moments(inputs: LeverageInputs, f: float) -> MomentPair:
    """Log-wealth moments when the variance is Gamma distributed with mean ``sigma_r2``.

    By total variance the randomness of the variance adds
    ``Var(f^2 s^2 T / 2) = f^4 sigma_r2^2 T^2 / (2 alpha)``.
    """
    base = gbm_log_moments(inputs, f)
    if inputs.alpha is None or math.isinf(inputs.alpha):
        return base
    extra = f**4 * inputs.sigma_r2**2 * inputs.T**2 / (2.0 * inputs.alpha)
    return MomentPair(base.mean, base.var + extra)


def kelly_gmv_uncertain_variance(inputs: LeverageInputs) -> LeverageResult:
    """Maximize the GMV with Gamma variance noise.

    Stationarity is the cubic ``(lambda sigma_r2^2 T / alpha) f^3 + (1 + lambda) S f - e = 0``,
    strictly increasing in ``f``; its root lies in ``(0, e / ((1 + lambda) S)]``.
    """
    if inputs.alpha is None or math.isinf(inputs.alpha):
        return kelly_gmv(inputs)
    lam, e, s = inputs.lam, inputs.excess, inputs.total_var
    if e <= 0:
        return _result(0.0, uncertain_variance_log_moments(inputs, 0.0), lam, Method.ROOT_FIND, [NO_FAVORABLE_LEVERAGE])
    cubic = lam * inputs.sigma_r2**2 * inputs.T / inputs.alpha
    f_hi = e / ((1.0 + lam) * s)
    f = safeguarded_root(
        lambda x: cubic * x**3 + (1.0 + lam) * s * x - e,
        0.0,
        f_hi,
        dfn=lambda x: 3 * cubic * x * x + (1.0 + lam) * s,
        tol=1e-15,
    )
    return _result(f, uncertain_variance_log_moments(inputs, f), lam, Method.ROOT_FIND)


def discrete_calibration(mean_arith: float, var_arith: float) -> tuple[float, float]:
    """Log-normal parameters ``(mu_d, sigma_d2)`` matching an arithmetic return's mean and variance."""
    if not var_arith > 0:
        raise DomainError("arithmetic variance must be positive")
    if not 1.0 + mean_arith > 0:
        raise DomainError("mean arithmetic return must exceed -1")
    sigma_d2 = math.log1p(var_arith / (1.0 + mean_arith) ** 2)
    mu_d = math.log1p(mean_arith) - 0.5 * sigma_d2
    return mu_d, sigma_d2


def combine_allocation(w_star, f_star: float) -> np.ndarray:
    return f_star * np.asarray(w_star, dtype=float)


# -- binary bets ----------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryBet:
    """Win ``b`` per unit staked with probability ``p``, otherwise lose ``a_loss``."""

    p: float
    b: float
    a_loss: float
    lam: float = 0.0

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError("p must lie in (0, 1)")
        if not self.b > 0:
            raise DomainError("b must be positive")
        if not 0 < self.a_loss <= 1:
            raise DomainError("a_loss must lie in (0, 1]")
        if not self.lam >= 0:
            raise DomainError("lambda must be non-negative")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def favorable(self) -> bool:
        return self.p * self.b > self.q * self.a_loss

    @property
    def f_max(self) -> float:
        return 1.0 / self.a_loss


def binary_log_moments(bet: BinaryBet, f: float) -> MomentPair:
    if not -1.0 / bet.b < f < bet.f_max:
        raise DomainError(f"f={f} outside (-1/b, 1/a_loss)")
    up, down = math.log1p(bet.b * f), math.log1p(-bet.a_loss * f)
    return MomentPair(bet.p * up + bet.q * down, bet.p * bet.q * (up - down) ** 2)


def binary_kelly_exact(bet: BinaryBet) -> float:
    """Kelly fraction ``p/a - q/b``; zero for a game that is not favorable."""
    if not bet.favorable:
        return 0.0
    return min(bet.p / bet.a_loss - bet.q / bet.b, bet.f_max * (1 - BOUNDARY_SHRINK))


def binary_stationarity(bet: BinaryBet, f: float) -> float:
    """Increasing function whose zero is the GMV-optimal bet fraction."""
    p, q, a, b = bet.p, bet.q, bet.a_loss, bet.b
    log_ratio = math.log1p(b * f) - math.log1p(-a * f)
    return b * p * (a * f - 1) + a * q * (b * f + 1) + bet.lam * p * q * (a + b) * log_ratio


def binary_gmv(bet: BinaryBet) -> LeverageResult:
    p, q, a, b, lam = bet.p, bet.q, bet.a_loss, bet.b, bet.lam
    delta = a * b / (lam * p * q * (a + b) ** 2 + a * b)
    f_lin = (b * p - a * q) / (lam * p * q * (a + b) ** 2 + a * b)
    diag = {"f_linearized": f_lin, "kelly_multiplier": delta, "f_kelly": binary_kelly_exact(bet)}
    h0 = binary_stationarity(bet, 0.0)
    if h0 >= 0:
        return _result(0.0, binary_log_moments(bet, 0.0), lam, Method.ROOT_FIND, [UNFAVORABLE_GAME], **diag)

    def dh(f):
        return a * b + lam * p * q * (a + b) * (b / (1 + b * f) + a / (1 - a * f))

    hi = bet.f_max * (1 - BOUNDARY_SHRINK)
    f = safeguarded_root(lambda x: binary_stationarity(bet, x), 0.0, hi, dfn=dh, tol=1e-13)
    return _result(f, binary_log_moments(bet, f), lam, Method.ROOT_FIND, **diag)


@dataclass(frozen=True)
class BayesBinaryBet:
    """A run of ``N`` bets whose win probability has a Beta posterior after ``y1`` wins in ``n1`` trials."""

    y1: float
    n1: float
    prior_alpha: float
    prior_beta: float
    N: int
    b: float
    a_loss: float
    lam: float = 0.0

    def __post_init__(self):
        if not 0 <= self.y1 <= self.n1:
            raise DomainError("need 0 <= y1 <= n1")
        if not (self.prior_alpha > 0 and self.prior_beta > 0):
            raise DomainError("prior pseudo-counts must be positive")
        if not self.N >= 1:
            raise DomainError("N must be at least 1")
        if not self.b > 0:
            raise DomainError("b must be positive")
        if not 0 < self.a_loss <= 1:
            raise DomainError("a_loss must lie in (0, 1]")
        if not self.lam >= 0:
            raise DomainError("lambda must be non-negative")

    @property
    def post_a(self) -> float:
        return self.y1 + self.prior_alpha

    @property
    def post_b(self) -> float:
        return self.n1 - self.y1 + self.prior_beta

    @property
    def p_pred(self) -> float:
        return self.post_a / (self.post_a + self.post_b)

    def wins_moments(self) -> tuple[float, float]:
        """Beta-Binomial mean and variance of the number of wins."""
        tot = self.post_a + self.post_b
        p = self.p_pred
        mean = self.N * p
        var = self.N * p * (1 - p) * (tot + self.N) / (tot + 1)
        return mean, var


def bayes_binary_moments(bet: BayesBinaryBet, f: float) -> MomentPair:
    if not -1.0 / bet.b < f < 1.0 / bet.a_loss:
        raise DomainError(f"f={f} outside (-1/b, 1/a_loss)")
    ek, vk = bet.wins_moments()
    down = math.log1p(-bet.a_loss * f)
    c = math.log1p(bet.b * f) - down
    return MomentPair(bet.N * down + c * ek, c * c * vk)


def bayes_binary_optimal(bet: BayesBinaryBet, grid_points: int = 2001) -> LeverageResult:
    a, b, lam, n = bet.a_loss, bet.b, bet.lam, bet.N
    ek, vk = bet.wins_moments()

    def obj(f):
        return gmv_score(bayes_binary_moments(bet, f), lam)

    def d1(f):
        c = math.log1p(b * f) - math.log1p(-a * f)
        cp = b / (1 + b * f) + a / (1 - a * f)
        return -n * a / (1 - a * f) + cp * ek - lam * c * cp * vk

    def d2(f):
        c = math.log1p(b * f) - math.log1p(-a * f)
        cp = b / (1 + b * f) + a / (1 - a * f)
        cpp = -(b**2) / (1 + b * f) ** 2 + a**2 / (1 - a * f) ** 2
        return -n * a * a / (1 - a * f) ** 2 + cpp * ek - lam * (cp * cp + c * cpp) * vk

    hi = 1.0 / a - BOUNDARY_SHRINK
    f = grid_refine_max(obj, 0.0, hi, n=grid_points)
    f = newton_polish(obj, d1, d2, f, 0.0, hi)
    flags = []
    if f <= BOUNDARY_SHRINK or d1(0.0) <= 0:
        f = 0.0
        flags.append(UNFAVORABLE_PREDICTIVE_ODDS)
    return _result(f, bayes_binary_moments(bet, f), lam, Method.GRID_REFINE, flags)


# -- CRRA ------------------------------------------------------------------------------


def crra_utility_moments(gamma: float, inputs: LeverageInputs, f: float) -> MomentPair:
    """Moments of CRRA utility of wealth at leverage ``f`` (drift uncertainty enters the log-location)."""
    T = inputs.T
    mu_ln = gbm_log_moments(inputs, f).mean
    return crra_moments(mu_ln, f * f * inputs.sigma_r2 * T, f * f * inputs.sigma0_2 * T * T, gamma)


def crra_leverage(gamma: float, inputs: LeverageInputs) -> LeverageResult:
    """CRRA leverage; ``lambda = 0`` is expected utility with ``f* = e / (gamma S)``."""
    if gamma < 0 or math.isnan(gamma):
        raise DomainError("gamma must be positive")
    lam, e, s = inputs.lam, inputs.excess, inputs.total_var
    if gamma == 1:
        return kelly_gmv(inputs)
    if gamma == 0:
        if lam == 0 and e > 0:
            return LeverageResult(math.inf, math.inf, math.inf, math.inf, Method.CLOSED_FORM, (UNBOUNDED_LEVERAGE,))
        raise DomainError("gamma must be positive")
    f_meu = e / (gamma * s)
    if lam == 0:
        return _result(f_meu, crra_utility_moments(gamma, inputs, f_meu), 0.0, Method.CLOSED_FORM)
    if e <= 0:
        return _result(0.0, crra_utility_moments(gamma, inputs, 0.0), lam, Method.GRID_REFINE, [NO_FAVORABLE_LEVERAGE])

    def obj(f):
        try:
            return gmv_score(crra_utility_moments(gamma, inputs, f), lam)
        except (OverflowError, DomainError):
            return -math.inf

    f = grid_refine_max(obj, 0.0, 3.0 * f_meu)
    return _result(f, crra_utility_moments(gamma, inputs, f), lam, Method.GRID_REFINE)


def calibrate_crra_gamma(x_ce: float, mu_ln: float, sigma_ln2: float) -> float:
    """Relative risk aversion whose certainty equivalent ``e^{mu + sigma^2 (1 - gamma) / 2}`` equals ``x_ce``."""
    if not (x_ce > 0 and sigma_ln2 > 0):
        raise DomainError("x_ce and sigma_ln2 must be positive")
    gamma = 1.0 - 2.0 * (math.log(x_ce) - mu_ln) / sigma_ln2
    if not gamma > 0:
        raise DomainError(f"certainty equivalent implies non-positive gamma ({gamma:.6g})")
    return gamma

