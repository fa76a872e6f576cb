"""Optimal diversification weights under exponential utility.

Closed forms exist for the unconstrained problems without drift uncertainty:
the Gaussian mean-variance weight, and the same direction rescaled by a
shrinkage factor ``g`` for ALD returns (fat tails and skew) and for Gaussian
returns with a Wishart-noisy covariance. Everything else goes through a
damped Newton solver with an active set for box and budget constraints.

Also here: risk budgeting, a two-regime (normal/stressed) allocation,
risk parity and a minimax (max-weight penalized) portfolio.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve

from ._numerics import cho_factor, golden_max, spd_solve, symmetrize
from .errors import DomainError, LogDomainError, NotConvergedError, NumericalError
from .gmv_objectives import (
    _risk_argument,
    cara_gradient_multi,
    cara_hessian_multi,
    cara_objective_multi,
)
from .market_model import Family, ReturnModel


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-10
    max_iter: int = 500
    backtrack_factor: float = 0.5
    domain_margin: float = 1e-12

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.max_iter > 0 and self.domain_margin > 0):
            raise DomainError("solver tolerances and iteration cap must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise DomainError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class AllocationResult:
    """Risky weights and the portfolio statistics fed to the leverage step.

    ``mu_p`` is the expected excess return, ``sigma0_p2`` the part of the
    variance due to drift uncertainty and ``sigma_p2`` the total variance.
    """

    w: np.ndarray
    cash: float
    mu_p: float
    sigma0_p2: float
    sigma_p2: float
    sharpe: float
    objective: float = math.nan
    iterations: int = 0
    residual: float = 0.0
    method: str = "closed_form"

    @classmethod
    def from_weights(cls, w, excess, Sigma, Sigma0=None, **extra) -> "AllocationResult":
        w = np.array(w, dtype=float)
        w.setflags(write=False)
        mu_p = float(w @ excess)
        s0 = 0.0 if Sigma0 is None else float(w @ Sigma0 @ w)
        sp = float(w @ Sigma @ w) + s0
        sharpe = mu_p / math.sqrt(sp) if sp > 0 else 0.0
        return cls(w, float(1.0 - w.sum()), mu_p, s0, sp, sharpe, **extra)

    @property
    def sigma_p(self) -> float:
        return math.sqrt(self.sigma_p2)

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "cash": self.cash,
            "mu_p": self.mu_p,
            "sigma0_p2": self.sigma0_p2,
            "sigma_p2": self.sigma_p2,
            "sharpe": self.sharpe,
            "objective": None if math.isnan(self.objective) else self.objective,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
        }

    def to_csv(self, asset_names=None) -> str:
        names = list(asset_names) if asset_names is not None else [f"w{i}" for i in range(self.w.size)]
        if len(names) != self.w.size:
            raise DomainError("asset_names length does not match the weights")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(names + ["mu_p", "sigma_p", "sharpe", "cash"])
        values = list(self.w) + [self.mu_p, self.sigma_p, self.sharpe, self.cash]
        writer.writerow([format(float(v), ".17g") for v in values])
        return buf.getvalue()


def _result(model: ReturnModel, w, **extra) -> AllocationResult:
    return AllocationResult.from_weights(w, model.excess, model.Sigma, model.Sigma0, **extra)


def sharpe_squared(mu, Sigma, r0: float = 0.0) -> float:
    """``q = (mu - r0)' Sigma^-1 (mu - r0)``, the squared maximal Sharpe ratio."""
    e = np.atleast_1d(np.asarray(mu, dtype=float)) - r0
    return float(e @ spd_solve(symmetrize(Sigma), e))


def solve_gaussian_closed(model: ReturnModel, a: float) -> AllocationResult:
    if model.family is not Family.GAUSSIAN:
        raise DomainError("solve_gaussian_closed needs a Gaussian model")
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    w = spd_solve(model.Sigma + model.Sigma0, model.excess) / a
    return _result(model, w, objective=cara_objective_multi(model, a, w))


def scaling_ald(q: float, v: float) -> float:
    """Positive root of ``q/2 g^2 + g - (1 + v/2) = 0``.

    Written as ``(2 + v) / (1 + sqrt(1 + 2q + qv))`` to stay accurate as q -> 0.
    """
    if not q > 0:
        raise DomainError("q must be positive")
    if not v >= 0:
        raise DomainError("v must be non-negative")
    return (2.0 + v) / (1.0 + math.sqrt(1.0 + 2.0 * q + q * v))


def scaling_wishart(q: float, alpha: float) -> float:
    """Shrinkage ``(sqrt(alpha(4q + alpha)) - alpha) / (2q)`` in a cancellation-free form."""
    if not (q > 0 and alpha > 0):
        raise DomainError("q and alpha must be positive")
    if math.isinf(alpha):
        return 1.0
    return 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * q / alpha))


def solve_closed(model: ReturnModel, a: float) -> AllocationResult:
    if model.has_drift_uncertainty:
        raise DomainError("closed form unavailable with Sigma0 != 0, use solve_numeric")
    if model.family is Family.GAUSSIAN:
        return solve_gaussian_closed(model, a)
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    direction = spd_solve(model.Sigma, model.excess)
    q = float(model.excess @ direction)
    if model.family is Family.WISHART:
        w = scaling_wishart(q, model.alpha) * direction / a
    else:
        skew_dir = spd_solve(model.Sigma, model.mu_a)
        v = float(model.mu_a @ skew_dir)
        w = (scaling_ald(q, v) * direction + skew_dir) / a
    return _result(model, w, objective=cara_objective_multi(model, a, w))


# -- constrained damped Newton -------------------------------------------------


def _project(v: np.ndarray, lo: np.ndarray, hi: np.ndarray, budget: bool) -> np.ndarray:
    """Euclidean projection onto the box [lo, hi], intersected with sum(w) = 1 if ``budget``."""
    if not budget:
        return np.clip(v, lo, hi)
    if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
        return v - (v.sum() - 1.0) / v.size

    def total(tau):
        return np.clip(v - tau, lo, hi).sum()

    step = 1.0
    t_lo, t_hi = v.min() - step, v.max() + step
    while total(t_lo) < 1.0:
        step *= 2
        t_lo = v.min() - step
    while total(t_hi) > 1.0:
        step *= 2
        t_hi = v.max() + step
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if mid in (t_lo, t_hi):
            break
        if total(mid) > 1.0:
            t_lo = mid
        else:
            t_hi = mid
    return np.clip(v - 0.5 * (t_lo + t_hi), lo, hi)


@dataclass
class _Solution:
    w: np.ndarray
    value: float
    iterations: int
    residual: float


def _newton_direction(g: np.ndarray, h: np.ndarray, free: np.ndarray, budget: bool) -> np.ndarray:
    d = np.zeros_like(g)
    idx = np.flatnonzero(free)
    if idx.size == 0 or (budget and idx.size == 1):
        return d
    gf = g[idx]
    hf = h[np.ix_(idx, idx)]
    try:
        neg = cho_factor(-hf)
        if budget:
            ones = np.ones(idx.size)
            x = cho_solve(neg, gf)
            y = cho_solve(neg, ones)
            # step solving H d + nu 1 = -g with 1'd = 0
            d[idx] = x - y * (ones @ x) / (ones @ y)
        else:
            d[idx] = cho_solve(neg, gf)
    except NumericalError:
        # not concave here: fall back to (projected) steepest ascent
        step = gf - gf.mean() if budget else gf
        d[idx] = step
    return d


def _maximize(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    w0: np.ndarray,
    cfg: SolverConfig,
    lo: np.ndarray | None = None,
    hi: np.ndarray | None = None,
    budget: bool = False,
    in_domain: Callable[[np.ndarray], bool] | None = None,
) -> _Solution:
    """Maximize a smooth concave ``f`` over ``{lo <= w <= hi}`` (and ``sum(w) = 1`` if ``budget``).

    Primal active-set method: Newton steps on the current face, truncated at
    the first blocking bound, with backtracking that rejects any point outside
    the objective's domain. Bounds are released when their multiplier has the
    wrong sign. Stationarity is measured by the max-norm of the gradient on
    the face; the returned residual is ``|w - P(w + grad)|_inf``.
    """
    n = w0.size
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float)
    w = np.array(w0, dtype=float)
    ok = in_domain or (lambda x: True)
    if not ok(w):
        raise DomainError("start point lies outside the objective's domain")
    fw = f(w)
    at_lo = w <= lo
    at_hi = w >= hi
    eps = np.finfo(float).eps

    def residual(x, g):
        return float(np.max(np.abs(x - _project(x + g, lo, hi, budget))))

    for it in range(1, cfg.max_iter + 1):
        g = grad(w)
        free = ~(at_lo | at_hi)
        gf = g[free]
        if gf.size:
            nu = gf.mean() if budget else 0.0
            face_res = float(np.max(np.abs(gf - nu)))
        else:
            nu = g.mean() if budget else 0.0
            face_res = 0.0
        if budget and gf.size == 1:
            face_res = 0.0
        if face_res <= cfg.grad_tol:
            viol = np.where(at_lo, g - nu, -np.inf)
            viol = np.maximum(viol, np.where(at_hi, nu - g, -np.inf))
            j = int(np.argmax(viol)) if n else 0
            if n and viol[j] > cfg.grad_tol:
                at_lo[j] = at_hi[j] = False
                continue
            return _Solution(w, fw, it, residual(w, g))

        d = _newton_direction(g, hess(w), free, budget)
        # largest feasible step along d
        with np.errstate(divide="ignore", invalid="ignore"):
            to_lo = np.where(free & (d < 0), (lo - w) / d, np.inf)
            to_hi = np.where(free & (d > 0), (hi - w) / d, np.inf)
        tau = np.minimum(to_lo, to_hi)
        j_block = int(np.argmin(tau))
        t_max = float(tau[j_block])
        t = min(1.0, t_max)
        slope = float(g @ d)
        accepted = False
        while t > 1e-18:
            cand = w + t * d
            blocked = t == t_max
            if blocked:
                cand[j_block] = lo[j_block] if d[j_block] < 0 else hi[j_block]
            cand = np.clip(cand, lo, hi)
            if ok(cand):
                try:
                    fc = f(cand)
                except LogDomainError:
                    fc = -np.inf
                armijo = fc >= fw + 1e-4 * t * slope
                # near the optimum the gain drops below rounding of f
                flat = fc >= fw - 8 * eps * max(1.0, abs(fw)) and t == 1.0
                if armijo or flat:
                    accepted = True
                    break
            t *= cfg.backtrack_factor
        if not accepted:
            # no ascent possible along d; treat as converged on this face
            g = grad(w)
            res = residual(w, g)
            if res <= max(cfg.grad_tol, 1e3 * eps):
                return _Solution(w, fw, it, res)
            raise NotConvergedError("line search failed", best=w, residual=res)
        w, fw = cand, fc
        if blocked:
            if d[j_block] < 0:
                at_lo[j_block] = True
            else:
                at_hi[j_block] = True
    g = grad(w)
    raise NotConvergedError("solver hit the iteration cap", best=w, residual=residual(w, g))


def solve_numeric(
    model: ReturnModel,
    a: float,
    cfg: SolverConfig | None = None,
    long_only: bool = False,
    sum_to_one: bool = False,
) -> AllocationResult:
    """Maximize the CARA certainty equivalent numerically.

    Starts from all cash (``w = 0``), where every family's log argument is 1;
    with ``sum_to_one`` the start is the equal-weight portfolio instead.
    """
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    cfg = cfg or SolverConfig()
    n = model.n_assets
    w0 = np.full(n, 1.0 / n) if sum_to_one else np.zeros(n)

    def in_domain(w):
        return _risk_argument(model, a, w)[0] > cfg.domain_margin

    if not in_domain(w0):
        raise DomainError("equal-weight start violates the log domain; budget constraint infeasible")
    sol = _maximize(
        lambda w: cara_objective_multi(model, a, w),
        lambda w: cara_gradient_multi(model, a, w),
        lambda w: cara_hessian_multi(model, a, w),
        w0,
        cfg,
        lo=np.zeros(n) if long_only else None,
        budget=sum_to_one,
        in_domain=in_domain,
    )
    return _result(model, sol.w, objective=sol.value, iterations=sol.iterations, residual=sol.residual, method="numeric")


def risk_budget(mu, Sigma, r0: float, sigma_target: float) -> np.ndarray:
    """Maximum expected excess return subject to portfolio volatility ``sigma_target``."""
    if not sigma_target > 0:
        raise DomainError("sigma_target must be positive")
    sigma = symmetrize(Sigma)
    e = np.atleast_1d(np.asarray(mu, dtype=float)) - r0
    direction = spd_solve(sigma, e)
    q = float(e @ direction)
    if not q > 0:
        raise DomainError("no excess return: mu equals r0")
    return sigma_target / math.sqrt(q) * direction


# -- regime mixture -------------------------------------------------------------


def equicorrelation_matrix(sigma: float, rho: float, n: int) -> np.ndarray:
    if n > 1 and not -1.0 / (n - 1) < rho <= 1:
        raise DomainError(f"rho must lie in (-1/(N-1), 1], got {rho}")
    return sigma**2 * ((1 - rho) * np.eye(n) + rho * np.ones((n, n)))


@dataclass(frozen=True)
class RegimeSpec:
    """Normal regime with probability ``p``, stressed regime with ``1 - p``.

    Means are excess returns over cash.
    """

    p: float
    mu_n: np.ndarray
    Sigma_n: np.ndarray
    mu_s: np.ndarray
    Sigma_s: np.ndarray

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise DomainError("p must lie in [0, 1]")
        mu_n = np.atleast_1d(np.asarray(self.mu_n, dtype=float))
        mu_s = np.atleast_1d(np.asarray(self.mu_s, dtype=float))
        sn, ss = symmetrize(self.Sigma_n), symmetrize(self.Sigma_s)
        n = mu_n.size
        if mu_s.size != n or sn.shape != (n, n) or ss.shape != (n, n):
            raise DomainError("inconsistent regime dimensions")
        cho_factor(sn)
        cho_factor(ss)
        for name, val in (("mu_n", mu_n), ("mu_s", mu_s), ("Sigma_n", sn), ("Sigma_s", ss)):
            object.__setattr__(self, name, val)

    @classmethod
    def with_equicorrelated_stress(cls, p, mu_n, Sigma_n, mu_s, sigma_s, rho_s) -> "RegimeSpec":
        n = np.atleast_1d(mu_n).size
        return cls(p, mu_n, Sigma_n, mu_s, equicorrelation_matrix(sigma_s, rho_s, n))


def two_state_objective(spec: RegimeSpec, a: float, w) -> float:
    """``log(exp(u_n) + exp(u_s))``, the log of minus the expected CARA exponential.

    Lower is better. Evaluated with a max shift so |u| up to ~700 stays finite.
    """
    w = np.asarray(w, dtype=float)
    terms = []
    for prob, mu, sig in ((spec.p, spec.mu_n, spec.Sigma_n), (1 - spec.p, spec.mu_s, spec.Sigma_s)):
        if prob > 0:
            terms.append(math.log(prob) + 0.5 * a * a * float(w @ sig @ w) - a * float(mu @ w))
    top = max(terms)
    return top + math.log(sum(math.exp(u - top) for u in terms))


def two_state_allocate(spec: RegimeSpec, a: float, cfg: SolverConfig | None = None) -> AllocationResult:
    if not a > 0:
        raise DomainError("risk aversion a must be positive")
    cfg = cfg or SolverConfig()
    regimes = [(spec.p, spec.mu_n, spec.Sigma_n), (1 - spec.p, spec.mu_s, spec.Sigma_s)]
    regimes = [r for r in regimes if r[0] > 0]
    mix_mu = sum(prob * mu for prob, mu, _ in regimes)
    mix_cov = sum(prob * (sig + np.outer(mu - mix_mu, mu - mix_mu)) for prob, mu, sig in regimes)

    if len(regimes) == 1:
        _, mu, sig = regimes[0]
        w = spd_solve(sig, mu) / a
        return AllocationResult.from_weights(
            w, mix_mu, mix_cov, objective=two_state_objective(spec, a, w), method="single_regime"
        )

    def parts(w):
        us, grads, hs = [], [], []
        for prob, mu, sig in regimes:
            sw = sig @ w
            us.append(math.log(prob) + 0.5 * a * a * float(w @ sw) - a * float(mu @ w))
            grads.append(a * a * sw - a * mu)
            hs.append(a * a * sig)
        u = np.array(us)
        pi = np.exp(u - u.max())
        pi /= pi.sum()
        return pi, grads, hs

    def grad(w):
        pi, grads, _ = parts(w)
        return -(pi[0] * grads[0] + pi[1] * grads[1])

    def hess(w):
        pi, grads, hs = parts(w)
        diff = grads[0] - grads[1]
        return -(pi[0] * hs[0] + pi[1] * hs[1] + pi[0] * pi[1] * np.outer(diff, diff))

    sol = _maximize(
        lambda w: -two_state_objective(spec, a, w), grad, hess, np.zeros(spec.mu_n.size), cfg
    )
    return AllocationResult.from_weights(
        sol.w, mix_mu, mix_cov, objective=-sol.value, iterations=sol.iterations, residual=sol.residual, method="numeric"
    )


def equicorr_residual_risk(sigma_s: float, rho_s: float, N: int) -> float:
    """Variance of the equal-weight portfolio under an equicorrelated covariance."""
    if not (N >= 1 and sigma_s > 0):
        raise DomainError("need N >= 1 and sigma_s > 0")
    if rho_s > 1 or (N > 1 and not rho_s > -1.0 / (N - 1)):
        raise DomainError(f"rho_s must lie in (-1/(N-1), 1], got {rho_s}")
    return sigma_s**2 / N * (1 + rho_s * (N - 1))


# -- risk parity and minimax ----------------------------------------------------


def risk_contributions(w, Sigma) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w * (np.asarray(Sigma) @ w)


def risk_parity(Sigma, b: float = 1.0, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Equal-risk-contribution weights.

    Cyclic coordinate descent on ``1/2 y'Sigma y - b sum(log y)``: each
    coordinate has the closed update ``y_i = (-c_i + sqrt(c_i^2 + 4 S_ii b)) / (2 S_ii)``
    with ``c_i = sum_{j != i} S_ij y_j``. The minimizer satisfies
    ``y_i (Sigma y)_i = b`` for every i; normalizing to ``sum(w) = 1``
    keeps the contributions equal, so ``b`` only sets the pre-normalization scale.
    """
    if not b > 0:
        raise DomainError("b must be positive")
    s = symmetrize(Sigma)
    cho_factor(s)
    n = s.shape[0]
    diag = np.diag(s).copy()
    y = 1.0 / np.sqrt(diag)
    y *= math.sqrt(b / float(y @ s @ y) * n)
    sy = s @ y
    for _ in range(max_iter):
        for i in range(n):
            c = sy[i] - diag[i] * y[i]
            new = (-c + math.sqrt(c * c + 4 * diag[i] * b)) / (2 * diag[i])
            sy += s[:, i] * (new - y[i])
            y[i] = new
        sy = s @ y
        spread = float(np.max(np.abs(y * sy - b)))
        if spread <= tol * b:
            return y / y.sum()
    w = y / y.sum()
    rc = risk_contributions(w, s)
    raise NotConvergedError("risk parity did not converge", best=w, residual=float(rc.max() - rc.min()))


@dataclass(frozen=True)
class PenaltySpec:
    """Weights of the log penalty (risk parity) and the max-weight penalty (minimax)."""

    rp_b: float = 1.0
    mm_c: float = 1.0

    def __post_init__(self):
        if not (self.rp_b > 0 and self.mm_c > 0):
            raise DomainError("penalty weights must be positive")


class MinimaxMode(str, Enum):
    PENALTY = "penalty"
    WORST_DRIFT = "worst_drift"


@dataclass(frozen=True)
class MinimaxProblem:
    """Minimize ``1/2 w'Qw - l'w + c max_i w_i`` over the simplex.

    ``penalty(Sigma, c)``: ``Q = Sigma, l = 0``.
    ``worst_drift(mu0, min_y, Sigma, a)``: ``Q = a Sigma, l = mu0, c = -min_y``,
    where ``min_y <= 0`` is the worst-case drift shortfall applied to the largest weight.
    """

    Q: np.ndarray
    l: np.ndarray
    c: float
    mode: MinimaxMode = field(default=MinimaxMode.PENALTY)

    @classmethod
    def penalty(cls, Sigma, c: float) -> "MinimaxProblem":
        if not c >= 0:
            raise DomainError("penalty weight c must be non-negative")
        s = symmetrize(Sigma)
        return cls(s, np.zeros(s.shape[0]), float(c), MinimaxMode.PENALTY)

    @classmethod
    def worst_drift(cls, mu0, min_y: float, Sigma, a: float) -> "MinimaxProblem":
        if not min_y <= 0:
            raise DomainError("min_y must be non-positive")
        if not a > 0:
            raise DomainError("risk aversion a must be positive")
        s = symmetrize(Sigma)
        return cls(a * s, np.atleast_1d(np.asarray(mu0, dtype=float)), float(-min_y), MinimaxMode.WORST_DRIFT)

    def value(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(0.5 * w @ self.Q @ w - self.l @ w + self.c * w.max())


def minimax_allocate(problem: MinimaxProblem, cfg: SolverConfig | None = None) -> np.ndarray:
    """Long-only, fully invested weights minimizing ``problem``.

    Epigraph form: with ``t >= w_i`` the objective becomes
    ``1/2 w'Qw - l'w + c t``. For fixed ``t`` the weights solve a
    strictly convex QP on the capped simplex (active-set Newton); the optimal
    value is convex in ``t`` and minimized over ``[1/N, 1]`` by golden section.
    Weights within 1e-9 of the maximum count as tied.
    """
    cfg = cfg or SolverConfig()
    q = problem.Q
    cho_factor(q)
    n = q.shape[0]
    zeros = np.zeros(n)

    def inner(t):
        sol = _maximize(
            lambda w: -float(0.5 * w @ q @ w - problem.l @ w),
            lambda w: -(q @ w - problem.l),
            lambda w: -q,
            np.full(n, 1.0 / n),
            cfg,
            lo=zeros,
            hi=np.full(n, t),
            budget=True,
        )
        return sol.w, -sol.value + problem.c * t

    cache: dict[float, tuple[np.ndarray, float]] = {}

    def phi(t):
        if t not in cache:
            cache[t] = inner(t)
        return -cache[t][1]

    t_lo = 1.0 / n
    t_star = golden_max(phi, t_lo, 1.0, width=1e-12)
    w, _ = cache[t_star]
    top = w.max()
    w = np.where(w >= top - 1e-9, top, w)
    w = w / w.sum()
    return w


# -- reference asymptotics (univariate) -----------------------------------------


def ald_asymmetry(sigma: float, kappa: float) -> float:
    """Asymmetry ``mu_a`` of a univariate ALD with scale ``sigma`` and skew ``kappa`` (``kappa = 1``: symmetric)."""
    if not (sigma > 0 and kappa > 0):
        raise DomainError("sigma and kappa must be positive")
    return sigma / math.sqrt(2.0) * (1.0 / kappa - kappa)


def ald_weight_large_mu(a: float, sigma: float, kappa: float) -> float:
    """Saturated single-asset ALD weight as the excess return grows without bound."""
    return math.sqrt(2.0) / (a * sigma * kappa)


def ald_weight_small_skew(mu: float, a: float, sigma: float, kappa: float) -> float:
    """Single-asset ALD weight to first order in the skew ``kappa - 1`` and small ``mu/sigma``."""
    return -math.sqrt(2.0) * (kappa - 1.0) / (a * sigma) + mu / (a * sigma**2)


def gamma_var_weight_large_alpha(mu: float, a: float, sigma: float, alpha: float) -> float:
    """Single-asset weight under Gamma variance noise, expanded for large ``alpha``."""
    return mu / (a * sigma**2) - mu**3 / (a * alpha * sigma**4)


def gamma_var_weight_small_alpha(mu: float, a: float, sigma: float, alpha: float) -> float:
    """Single-asset weight under Gamma variance noise, expanded for small ``alpha``."""
    return math.sqrt(alpha) / (a * sigma) - alpha / (2 * a * mu)
