"""Independent reference computations used only by the tests.

None of these call into the package's closed forms.
"""

import itertools
import math

import numpy as np
from scipy import integrate, optimize, special


def central_gradient(fn, w, rel_step=1e-6):
    w = np.asarray(w, dtype=float)
    g = np.empty_like(w)
    for i in range(w.size):
        h = rel_step * (1 + abs(w[i]))
        up, dn = w.copy(), w.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fn(up) - fn(dn)) / (2 * h)
    return g


def central_hessian(grad_fn, w, rel_step=1e-6):
    w = np.asarray(w, dtype=float)
    cols = []
    for i in range(w.size):
        h = rel_step * (1 + abs(w[i]))
        up, dn = w.copy(), w.copy()
        up[i] += h
        dn[i] -= h
        cols.append((grad_fn(up) - grad_fn(dn)) / (2 * h))
    return np.array(cols).T


def adjugate_inverse_3x3(m):
    m = np.asarray(m, dtype=float)
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(m, i, 0), j, 1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    det = float(m[0] @ cof[0])
    return cof.T / det


def grid_posterior(prior_mean, prior_var, sample_mean, obs_var, n, points=1_000_000):
    sd = math.sqrt(min(prior_var, obs_var / n))
    centre = sample_mean
    grid = np.linspace(centre - 40 * sd, centre + 40 * sd, points)
    logp = -0.5 * (grid - prior_mean) ** 2 / prior_var - 0.5 * n * (grid - sample_mean) ** 2 / obs_var
    p = np.exp(logp - logp.max())
    p /= p.sum()
    mean = float(p @ grid)
    return mean, float(p @ (grid - mean) ** 2)


def gaussian_expectation(fn, mu, sigma2):
    """E[fn(X)] for X ~ N(mu, sigma2) by adaptive QUADPACK on the real line."""
    sd = math.sqrt(sigma2)
    val, _ = integrate.quad(
        lambda z: fn(mu + sd * z) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi),
        -40, 40, epsabs=1e-15, epsrel=1e-13, limit=500, points=[0.0],
    )
    return val


def bounded_argmax(fn, lo, hi, xatol=1e-12):
    res = optimize.minimize_scalar(lambda x: -fn(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": xatol, "maxiter": 10_000})
    return float(res.x)


def grid_argmax(fn, lo, hi, points):
    grid = np.linspace(lo, hi, points)
    vals = np.array([fn(x) for x in grid])
    k = int(np.argmax(vals))
    return float(grid[k]), float(vals[k])


def beta_binomial_pmf(k, n, a, b):
    return math.exp(
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        + special.betaln(k + a, n - k + b) - special.betaln(a, b)
    )


def enumerate_bayes_log_wealth(y1, n1, pa, pb, N, b, a_loss, f):
    """Exact mean/variance of log wealth by summing over every win count."""
    A, B = y1 + pa, n1 - y1 + pb
    probs = np.array([beta_binomial_pmf(k, N, A, B) for k in range(N + 1)])
    vals = np.array([k * math.log1p(b * f) + (N - k) * math.log1p(-a_loss * f) for k in range(N + 1)])
    mean = float(probs @ vals)
    return mean, float(probs @ (vals - mean) ** 2), float(probs.sum())


def binomial_log_wealth(p, N, b, a_loss, f):
    probs = np.array([math.comb(N, k) * p**k * (1 - p) ** (N - k) for k in range(N + 1)])
    vals = np.array([k * math.log1p(b * f) + (N - k) * math.log1p(-a_loss * f) for k in range(N + 1)])
    mean = float(probs @ vals)
    return mean, float(probs @ (vals - mean) ** 2)


def simplex_grid(n, steps):
    """All points of the n-simplex on a regular lattice with ``steps`` divisions."""
    for combo in itertools.product(range(steps + 1), repeat=n - 1):
        s = sum(combo)
        if s <= steps:
            yield np.array(list(combo) + [steps - s], dtype=float) / steps


def simulate_abm_increment(mu_pd, sigma_pd2, sigma_mu2, sigma2, t, delta, dt, n_paths, seed):
    """Plain Euler simulation of X over [0, t + delta]; returns X_{t+delta} - X_t."""
    rng = np.random.default_rng(seed)
    m, n = int(round(t / dt)), int(round(delta / dt))
    mu = mu_pd + math.sqrt(sigma_pd2) * rng.standard_normal(n_paths)
    inc = np.zeros(n_paths)
    for k in range(m + n):
        step = mu * dt + math.sqrt(sigma2 * dt) * rng.standard_normal(n_paths)
        if k >= m:
            inc += step
        mu += math.sqrt(sigma_mu2 * dt) * rng.standard_normal(n_paths)
    return inc


def discrete_increment_variance(sigma_pd2, sigma_mu2, sigma2, t, delta, dt):
    """Exact variance of the Euler increment over [t, t + delta] (sum over the drift shocks)."""
    m, n = int(round(t / dt)), int(round(delta / dt))
    shocks = m * n**2 + sum(j**2 for j in range(1, n))
    return sigma2 * n * dt + (n * dt) ** 2 * sigma_pd2 + sigma_mu2 * dt**3 * shocks


def refined_grid_argmax(fn, lo, hi, points):
    """Dense grid argmax, then a second equally dense grid over the two cells around the winner."""
    x, _ = grid_argmax(fn, lo, hi, points)
    h = (hi - lo) / (points - 1)
    return grid_argmax(fn, max(lo, x - 2 * h), min(hi, x + 2 * h), points)


def mp_golden_argmax(fn, lo, hi, digits=40, width=1e-20):
    """Golden-section search in extended precision; ``fn`` must accept mpmath numbers."""
    import mpmath

    with mpmath.workdps(digits):
        a, b = mpmath.mpf(lo), mpmath.mpf(hi)
        inv = (mpmath.sqrt(5) - 1) / 2
        c, d = b - inv * (b - a), a + inv * (b - a)
        fc, fd = fn(c), fn(d)
        while b - a > width:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - inv * (b - a)
                fc = fn(c)
            else:
                a, c, fc = c, d, fd
                d = a + inv * (b - a)
                fd = fn(d)
        return float((a + b) / 2)
