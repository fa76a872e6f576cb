"""Small numerical kernels: SPD factorization, 1-D root finding and maximization."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import DomainError, NotConvergedError, NumericalError

ROOT_TOL = 1e-10
ROOT_MAX_ITER = 200
GOLDEN_WIDTH = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def symmetrize(a) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DomainError(f"matrix must be square, got shape {a.shape}")
    return 0.5 * (a + a.T)


def cho_factor(a: np.ndarray):
    """Cholesky factor of an SPD matrix.

    On failure a jitter of ``1e-10 * trace(a) / n`` is added once; a second
    failure raises :class:`NumericalError` with the condition number.
    """
    try:
        return linalg.cho_factor(a, lower=True, check_finite=True)
    except linalg.LinAlgError:
        pass
    n = a.shape[0]
    jitter = 1e-10 * np.trace(a) / n
    try:
        return linalg.cho_factor(a + jitter * np.eye(n), lower=True)
    except linalg.LinAlgError:
        raise NumericalError("matrix is not positive definite", np.linalg.cond(a)) from None


def spd_solve(a: np.ndarray, b) -> np.ndarray:
    return linalg.cho_solve(cho_factor(a), np.asarray(b, dtype=float))


def spd_inverse(a: np.ndarray) -> np.ndarray:
    inv = spd_solve(a, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def safeguarded_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    dfn: Callable[[float], float] | None = None,
    tol: float = ROOT_TOL,
    max_iter: int = ROOT_MAX_ITER,
) -> float:
    """Root of ``fn`` on a sign-changing bracket.

    Newton steps are taken when ``dfn`` is given and the step stays inside the
    current bracket; otherwise the bracket is bisected. Stops when
    ``|fn(x)| <= tol`` or the bracket collapses to machine precision.
    """
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise DomainError(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = fn(x)
        if abs(fx) <= tol:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return x
        x_next = 0.5 * (lo + hi)
        if dfn is not None:
            d = dfn(x)
            if d != 0 and np.isfinite(d):
                cand = x - fx / d
                if lo < cand < hi:
                    x_next = cand
        x = x_next
    raise NotConvergedError("root finder hit the iteration cap", best=x, residual=abs(fn(x)))


def golden_max(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    width: float = GOLDEN_WIDTH,
) -> float:
    """Golden-section search for the maximum of a unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    # endpoints are candidates too; the maximum may sit on the boundary
    best = max((fn(lo), lo), (fc, c), (fd, d), (fn(hi), hi))
    return best[1]


def newton_polish(
    fn: Callable[[float], float],
    d1: Callable[[float], float],
    d2: Callable[[float], float],
    x: float,
    lo: float,
    hi: float,
    steps: int = 2,
) -> float:
    """A few Newton steps on the stationarity condition, kept only if they improve ``fn``."""
    fx = fn(x)
    for _ in range(steps):
        h = d2(x)
        if not (h < 0 and np.isfinite(h)):
            break
        cand = x - d1(x) / h
        if not lo <= cand <= hi:
            break
        fc = fn(cand)
        if fc < fx:
            break
        x, fx = cand, fc
    return x


def maximize_1d(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    d1: Callable[[float], float] | None = None,
    d2: Callable[[float], float] | None = None,
) -> float:
    """Golden-section to width 1e-8, then Newton polishing when derivatives are supplied."""
    x = golden_max(fn, lo, hi)
    if d1 is not None and d2 is not None:
        x = newton_polish(fn, d1, d2, x, lo, hi)
    return x


def grid_refine_max(fn: Callable[[float], float], lo: float, hi: float, n: int = 2001) -> float:
    """Coarse grid scan followed by golden-section in the best cell's neighbourhood.

    For objectives that are not known to be unimodal.
    """
    grid = np.linspace(lo, hi, n)
    vals = np.array([fn(x) for x in grid])
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n - 1)]
    return golden_max(fn, a, b)
