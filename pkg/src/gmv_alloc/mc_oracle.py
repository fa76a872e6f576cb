"""Verification engines: Monte-Carlo paths and quadrature of expected utilities.

Nothing here shares code with the closed forms it checks. Simulations step
the discretized processes directly; quadrature integrates the utility against
the return density node by node.

Randomness is drawn per block of ``BLOCK_SIZE`` paths from a Philox stream
keyed by ``(seed, block_index)``, so results do not depend on how many threads
run the blocks or in which order.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, signal, special, stats

from .errors import DomainError, QuadratureError
from .gmv_objectives import MomentPair, UtilitySpec
from .kelly import BayesBinaryBet, BinaryBet
from .market_model import HorizonSpec, PosteriorBelief

BLOCK_SIZE = 1 << 16
KDE_GRID = 4096


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    dt: float
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 1):
            raise DomainError("n_paths must be a positive integer")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"n_paths": int(self.n_paths), "dt": self.dt, "seed": int(self.seed), "antithetic": self.antithetic}


@dataclass(frozen=True)
class PathStats:
    """Terminal-value statistics. ``values`` holds the raw terminal sample and is not serialized."""

    n_paths: int
    sample_mean: float
    sample_var: float
    sample_mode_kde: float
    mean_se: float
    var_se: float
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.sample_var >= 0:
            raise DomainError("sample variance must be non-negative")

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "sample_mean": self.sample_mean,
            "sample_var": self.sample_var,
            "sample_mode_kde": self.sample_mode_kde,
            "mean_se": self.mean_se,
            "var_se": self.var_se,
        }


def _n_threads() -> int:
    cap = os.environ.get("GMV_ALLOC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise DomainError(f"GMV_ALLOC_THREADS must be an integer, got {cap!r}") from None
    return n


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _normals(rng: np.random.Generator, size: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(size)
    half = rng.standard_normal((size + 1) // 2)
    return np.concatenate([half, -half])[:size]


def _run_blocks(n_paths: int, seed: int, block_fn) -> np.ndarray:
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    jobs = [(i, s) for i, s in enumerate(sizes)]
    workers = min(_n_threads(), len(jobs))
    if workers <= 1:
        parts = [block_fn(_block_rng(seed, i), s) for i, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: block_fn(_block_rng(seed, job[0]), job[1]), jobs))
    return np.concatenate(parts)


def kde_mode(sample: np.ndarray, grid_points: int = KDE_GRID) -> float:
    """Argmax of a Gaussian KDE with Silverman bandwidth, evaluated on a regular grid.

    Samples are binned onto the grid and smoothed by FFT convolution.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 2:
        return float(x[0]) if n else math.nan
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    if spread == 0:
        return float(x[0])
    h = 0.9 * spread * n ** (-0.2)
    lo, hi = np.quantile(x, [1e-4, 1 - 1e-4])
    lo, hi = lo - 3 * h, hi + 3 * h
    counts, edges = np.histogram(x, bins=grid_points, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    step = edges[1] - edges[0]
    half = int(math.ceil(5 * h / step))
    offsets = np.arange(-half, half + 1) * step
    kernel = np.exp(-0.5 * (offsets / h) ** 2)
    density = signal.fftconvolve(counts.astype(float), kernel, mode="same")
    return float(centers[int(np.argmax(density))])


def _stats(values: np.ndarray, antithetic: bool, mode_of: np.ndarray | None = None) -> PathStats:
    n = values.size
    mean = float(values.mean())
    var = float(values.var(ddof=1)) if n > 1 else 0.0
    sq = (values - mean) ** 2
    if antithetic and n >= 4:
        m = n // 2 * 2
        half = m // 2
        # pairs are (i, i + half) within each block; pair averages are iid
        pair_mean, pair_sq = _pair_average(values[:m]), _pair_average(sq[:m])
        mean_se = float(pair_mean.std(ddof=1) / math.sqrt(half))
        var_se = float(pair_sq.std(ddof=1) / math.sqrt(half))
    else:
        mean_se = math.sqrt(var / n) if n > 1 else 0.0
        var_se = float(sq.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    mode = kde_mode(values if mode_of is None else mode_of)
    return PathStats(n, mean, var, mode, mean_se, var_se, values)


def _pair_average(x: np.ndarray) -> np.ndarray:
    out = []
    for start in range(0, x.size, BLOCK_SIZE):
        blk = x[start : start + BLOCK_SIZE]
        half = blk.size // 2
        out.append(0.5 * (blk[:half] + blk[half : 2 * half]))
    return np.concatenate(out)


def _drift_paths(belief: PosteriorBelief, sigma2: float, horizon: HorizonSpec, cfg: SimConfig, drift_shift: float):
    """Terminal sums of ``mu_n dt + sigma sqrt(dt) eps_n``; ``mu`` itself random-walks.

    The initial drift is drawn from the posterior widened by the drift
    diffusion accumulated over ``t0``.
    """
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    dt = cfg.dt
    n_steps = int(round(horizon.T / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon.T) > 1e-9 * max(1.0, horizon.T):
        raise DomainError("horizon T must be a positive multiple of dt")
    sd0 = math.sqrt(belief.sigma_pd2 + belief.sigma_mu2 * horizon.t0)
    sd_mu = math.sqrt(belief.sigma_mu2 * dt)
    sd_x = math.sqrt(sigma2 * dt)
    anti = cfg.antithetic

    def block(rng, size):
        mu = belief.mu_pd + sd0 * _normals(rng, size, anti)
        x = np.zeros(size)
        for _ in range(n_steps):
            x += (mu + drift_shift) * dt + sd_x * _normals(rng, size, anti)
            if sd_mu:
                mu += sd_mu * _normals(rng, size, anti)
        return x

    return _run_blocks(cfg.n_paths, cfg.seed, block)


def simulate_abm(x0: float, belief: PosteriorBelief, sigma2: float, horizon: HorizonSpec, cfg: SimConfig) -> PathStats:
    """Arithmetic Brownian motion with a random-walk drift; stats of the terminal value ``X_T``."""
    values = x0 + _drift_paths(belief, sigma2, horizon, cfg, 0.0)
    return _stats(values, cfg.antithetic)


def simulate_gbm(x0: float, belief: PosteriorBelief, sigma2: float, horizon: HorizonSpec, cfg: SimConfig) -> PathStats:
    """Geometric Brownian motion with a random-walk drift.

    Mean, variance and standard errors refer to ``ln(S_T / S_0)``; the KDE
    mode refers to the wealth ratio ``S_T / S_0``.
    """
    if not x0 > 0:
        raise DomainError("x0 must be positive")
    logs = _drift_paths(belief, sigma2, horizon, cfg, -0.5 * sigma2)
    return _stats(logs, cfg.antithetic, mode_of=np.exp(logs))


def simulate_binary(bet, f: float, cfg: SimConfig, n_trials: int | None = None) -> PathStats:
    """Log wealth ``ln X_N`` after ``N`` bets of fraction ``f``.

    A :class:`BayesBinaryBet` draws the win probability per path from the
    Beta posterior; a :class:`BinaryBet` needs ``n_trials``. Antithetic
    sampling does not apply to discrete draws and is ignored.
    """
    if isinstance(bet, BayesBinaryBet):
        n = bet.N
    elif isinstance(bet, BinaryBet):
        if n_trials is None or n_trials < 1:
            raise DomainError("n_trials must be a positive integer for a BinaryBet")
        n = int(n_trials)
    else:
        raise DomainError("bet must be a BinaryBet or BayesBinaryBet")
    if not -1.0 / bet.b < f < 1.0 / bet.a_loss:
        raise DomainError(f"f={f} outside (-1/b, 1/a_loss)")
    up, down = math.log1p(bet.b * f), math.log1p(-bet.a_loss * f)

    def block(rng, size):
        if isinstance(bet, BayesBinaryBet):
            p = rng.beta(bet.post_a, bet.post_b, size)
        else:
            p = bet.p
        wins = rng.binomial(n, p, size)
        return wins * up + (n - wins) * down

    values = _run_blocks(cfg.n_paths, cfg.seed, block)
    return _stats(values, False)


# -- quadrature ------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianDensity:
    mu: float
    sigma2: float
    sigma0_2: float = 0.0


@dataclass(frozen=True)
class GammaVarianceDensity:
    """``N(mu, v + sigma0_2)`` with ``v ~ Gamma(alpha/2, scale=2 sigma2/alpha)``."""

    mu: float
    sigma2: float
    alpha: float
    sigma0_2: float = 0.0


@dataclass(frozen=True)
class ALDDensity:
    """``mu + mu_a V + sqrt(V) sigma Z`` (plus ``N(0, sigma0_2)``) with ``V ~ Exp(1)``."""

    mu: float
    sigma2: float
    mu_a: float
    sigma0_2: float = 0.0


@dataclass(frozen=True)
class StudentTDensity:
    mu: float
    scale: float
    nu: float


@dataclass(frozen=True)
class Affine:
    """Outcome ``(1 - w) r0 + w Y``, exponentiated when ``exponentiate`` (log-return inputs)."""

    w: float = 1.0
    r0: float = 0.0
    exponentiate: bool = False

    def __call__(self, y):
        out = (1.0 - self.w) * self.r0 + self.w * y
        return np.exp(out) if self.exponentiate else out


@dataclass(frozen=True)
class QuadratureResult:
    moments: MomentPair
    abs_error: float
    method: str


QUAD_TOL = 1e-10
_MAX_NODES = 512


def _gh(n):
    x, wts = special.roots_hermitenorm(n)
    return x, wts / math.sqrt(2 * math.pi)


def _laguerre(n, shape):
    """Gauss rule for the Gamma(shape, 1) density via Golub-Welsch.

    The eigenvector form yields normalized weights directly, so large shapes
    do not overflow the way the textbook weights do.
    """
    k = np.arange(n, dtype=float)
    diag = 2 * k + shape
    off = np.sqrt(k[1:] * (k[1:] + shape - 1.0))
    x, vecs = linalg.eigh_tridiagonal(diag, off)
    return x, vecs[0] ** 2


def _mixture_nodes(density, n):
    """Nodes and weights of the Gaussian-conditional representation ``Y | V ~ N(m(V), s2(V))``."""
    if isinstance(density, GaussianDensity):
        return np.array([density.mu]), np.array([density.sigma2 + density.sigma0_2]), np.array([1.0])
    if isinstance(density, GammaVarianceDensity):
        if not density.alpha > 0:
            raise DomainError("alpha must be positive")
        u, wts = _laguerre(n, density.alpha / 2)
        v = u * 2 * density.sigma2 / density.alpha
        return np.full(n, density.mu), v + density.sigma0_2, wts
    if isinstance(density, ALDDensity):
        u, wts = _laguerre(n, 1.0)
        return density.mu + density.mu_a * u, density.sigma2 * u + density.sigma0_2, wts
    raise DomainError(f"unsupported density {type(density).__name__}")


def _mixture_moments(density, utility, transform, n):
    means, variances, outer = _mixture_nodes(density, n)
    z, inner = _gh(n)
    y = means[:, None] + np.sqrt(variances)[:, None] * z[None, :]
    weights = outer[:, None] * inner[None, :]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u = utility(transform(y))
        m = float(np.sum(weights * u))
        v = float(np.sum(weights * (u - m) ** 2))
    return m, v


def expected_utility_quadrature(density, utility: UtilitySpec, transform: Affine | None = None) -> QuadratureResult:
    """Mean and variance of ``utility(transform(Y))`` by numerical integration.

    Gaussian-conditional families use Gauss-Hermite (nested in Gauss-Laguerre
    over a Gamma or exponential mixing variable), doubling the node count
    until successive estimates agree to ``QUAD_TOL``. Student-t densities use
    adaptive QUADPACK integration over tail segments that double outward;
    growth of the segment contributions flags a divergent integral.
    """
    transform = transform or Affine()
    if isinstance(density, StudentTDensity):
        return _student_t_moments(density, utility, transform)
    prev = None
    n = 16
    while n <= _MAX_NODES:
        cur = _mixture_moments(density, utility, transform, n)
        if not all(map(math.isfinite, cur)):
            raise QuadratureError("integrand is not finite at the quadrature nodes; the moment may not exist")
        if prev is not None:
            err = max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1]))
            scale = max(1.0, abs(cur[0]), abs(cur[1]))
            if err <= QUAD_TOL * scale:
                method = "gauss_hermite" if isinstance(density, GaussianDensity) else "gauss_laguerre_hermite"
                return QuadratureResult(MomentPair(*cur), err, method)
        prev = cur
        n *= 2
    raise QuadratureError("node doubling did not converge", err)


def _t_integral(g, density: StudentTDensity, tol: float):
    # roundoff warnings are expected while probing a divergent tail; divergence is judged below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _t_segments(g, density, tol)


def _t_segments(g, density: StudentTDensity, tol: float):
    dist = stats.t(density.nu, loc=density.mu, scale=density.scale)

    def f(y):
        return g(y) * dist.pdf(y)

    total, err = integrate.quad(f, density.mu - density.scale, density.mu + density.scale, epsabs=tol, epsrel=0, limit=200)
    width = density.scale
    prev_contrib = math.inf
    growing = 0
    for _ in range(60):
        left = integrate.quad(f, density.mu - 2 * width, density.mu - width, epsabs=tol, epsrel=0, limit=200)
        right = integrate.quad(f, density.mu + width, density.mu + 2 * width, epsabs=tol, epsrel=0, limit=200)
        contrib = abs(left[0]) + abs(right[0])
        total += left[0] + right[0]
        err += left[1] + right[1]
        if not math.isfinite(total):
            raise QuadratureError("integral diverges against the Student-t tails", math.inf)
        if contrib <= tol * max(1.0, abs(total)) and width > 10 * density.scale:
            return total, err + contrib
        if width > 10 * density.scale and contrib > prev_contrib:
            growing += 1
            if growing >= 2:
                raise QuadratureError("integral diverges against the Student-t tails", contrib)
        else:
            growing = 0
        prev_contrib = contrib
        width *= 2
    raise QuadratureError("tail segments did not become negligible", prev_contrib)


def _student_t_moments(density: StudentTDensity, utility, transform) -> QuadratureResult:
    if not (density.scale > 0 and density.nu > 0):
        raise DomainError("Student-t needs positive scale and nu")

    def g1(y):
        with np.errstate(over="ignore"):
            return float(utility(transform(y)))

    m, e1 = _t_integral(g1, density, QUAD_TOL)
    v, e2 = _t_integral(lambda y: (g1(y) - m) ** 2, density, QUAD_TOL)
    return QuadratureResult(MomentPair(m, v), e1 + e2, "quadpack_segments")


def cara_closed_via_mgf(mu: float, sigma2: float, a: float) -> float:
    """``(1 - MGF(-a)) / a`` for a Gaussian, the reference for CARA expected utility."""
    return -math.expm1(-a * mu + 0.5 * a * a * sigma2) / a


# -- uncertain-variance wealth ---------------------------------------------------


def _log_kv(nu: float, z: np.ndarray) -> np.ndarray:
    """``log K_nu(z)`` for ``z > 0``.

    Uses the scaled Bessel function where it is representable and the
    uniform large-order (Debye) expansion with three correction terms where
    it overflows, which only happens at large order.
    """
    nu = abs(nu)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = np.log(special.kve(nu, z)) - z
    bad = ~np.isfinite(out)
    if np.any(bad):
        x = z[bad] / nu
        r = np.sqrt(1.0 + x * x)
        t = 1.0 / r
        eta = r + np.log(x / (1.0 + r))
        u1 = (3 * t - 5 * t**3) / 24
        u2 = (81 * t**2 - 462 * t**4 + 385 * t**6) / 1152
        u3 = (30375 * t**3 - 369603 * t**5 + 765765 * t**7 - 425425 * t**9) / 414720
        series = 1 - u1 / nu + u2 / nu**2 - u3 / nu**3
        out[bad] = 0.5 * math.log(math.pi / (2 * nu)) - 0.5 * np.log(r) - nu * eta + np.log(series)
    return out


def gamma_mixed_lognormal_pdf(x, mu: float, sigma2: float, alpha: float, T: float):
    """Density of ``X_T / X_0`` for a GBM whose variance is ``Gamma(alpha/2, 2 sigma2/alpha)``.

    Integrating the variance out of the lognormal gives a modified Bessel
    function of the second kind in ``|mu T - ln x|``. The factor
    ``z^nu K_nu(c z)`` is evaluated in log space and replaced by its finite
    limit at the cusp ``z = 0``.
    """
    if not (sigma2 > 0 and alpha > 0 and T > 0):
        raise DomainError("sigma2, alpha and T must be positive")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    sig = math.sqrt(sigma2)
    z = np.abs(T * mu - np.log(x))
    k = math.sqrt(4 * alpha + sigma2 * T)
    c = k / (2 * math.sqrt(T) * sig)
    nu = (alpha - 1) / 2
    bessel = np.empty_like(z)
    pos = z > 0
    with np.errstate(divide="ignore"):
        bessel[pos] = nu * np.log(z[pos]) + _log_kv(nu, c * z[pos])
    if nu > 0:
        bessel[~pos] = special.gammaln(nu) + (nu - 1) * math.log(2) - nu * math.log(c)
    else:
        bessel[~pos] = math.inf
    log_num = (
        0.5 * alpha * math.log(alpha)
        + 0.5 * mu * T
        + 0.25 * (1 - alpha) * math.log(4 * alpha + sigma2 * T)
        + bessel
    )
    log_den = (
        0.5 * math.log(math.pi)
        + special.gammaln(alpha / 2)
        + 0.5 * (1 + alpha) * math.log(sig * math.sqrt(T))
        + 1.5 * np.log(x)
    )
    out = np.exp(log_num - log_den)
    return out[0] if scalar else out


def log_wealth_moments_from_density(mu: float, sigma2: float, alpha: float, T: float) -> MomentPair:
    """Mean and variance of ``ln(X_T/X_0)`` by integrating :func:`gamma_mixed_lognormal_pdf`.

    Works in the log variable ``y`` with density ``pdf(e^y) e^y``, split at
    the cusp ``y = mu T`` where the Bessel argument vanishes.
    """
    centre = mu * T
    spread = math.sqrt(sigma2 * T) * (1 + 2 / math.sqrt(alpha))

    def dens(y):
        return float(gamma_mixed_lognormal_pdf(math.exp(y), mu, sigma2, alpha, T)) * math.exp(y)

    def moment(g):
        total = 0.0
        for side in (-1.0, 1.0):
            total += _half_line(lambda y: g(y) * dens(y), side, centre, spread)
        return total

    m = moment(lambda y: y)
    v = moment(lambda y: (y - m) ** 2)
    return MomentPair(m, v)


def _half_line(fn, side: float, centre: float, spread: float) -> float:
    """Integral of ``fn`` from ``centre`` to +/- infinity in geometrically growing segments."""
    total = 0.0
    a, width = 0.0, spread
    for _ in range(80):
        b = a + width
        seg, _ = integrate.quad(lambda s: fn(centre + side * s), a, b, epsabs=0, epsrel=1e-13, limit=200)
        total += seg
        if abs(seg) <= 1e-16 * max(abs(total), 1e-300) and b > 10 * spread:
            return total
        a, width = b, width * 1.5
    raise QuadratureError("density tail did not become negligible", abs(seg))


def log_wealth_moments_mixture(mu: float, sigma2: float, alpha: float, T: float, n: int = 128) -> MomentPair:
    """Same moments by Gauss-Laguerre over the variance with the inner Gaussian done analytically.

    Given the variance ``v`` the log return is ``N((mu - v/2) T, v T)``.
    """
    u, wts = _laguerre(n, alpha / 2)
    v = u * 2 * sigma2 / alpha
    cond_mean = (mu - 0.5 * v) * T
    mean = float(wts @ cond_mean)
    var = float(wts @ (v * T + (cond_mean - mean) ** 2))
    return MomentPair(mean, var)
