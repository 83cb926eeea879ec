"""Small shared utilities for the test suite."""

import numpy as np


def make_spd(gen, dim, jitter=0.5):
    """Random well-conditioned SPD matrix."""
    a = gen.standard_normal((dim, dim))
    return a @ a.T + (dim * jitter) * np.eye(dim)


def rel_err(approx, exact):
    exact = np.asarray(exact, dtype=float)
    denom = max(float(np.linalg.norm(exact)), 1e-300)
    return float(np.linalg.norm(np.asarray(approx) - exact)) / denom


def ks_distance(draws, cdf):
    """Kolmogorov-Smirnov distance between draws and a callable CDF."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    f = cdf(x)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def quadrature_cdf(log_density, lo, hi, m=200001):
    """Trapezoid CDF of an unnormalized log density on [lo, hi]."""
    grid = np.linspace(lo, hi, m)
    dens = np.exp(log_density(grid) - np.max(log_density(grid)))
    cum = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0)])
    cum /= cum[-1]

    def cdf(x):
        return np.interp(x, grid, cum, left=0.0, right=1.0)

    return cdf
