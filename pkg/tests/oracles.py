"""Independent analytic oracles used by the tests.

Quantiles come from bisection on the regularized incomplete gamma/beta
functions, deliberately avoiding both the sampling code under test and
scipy's ppf implementations.
"""

import numpy as np
from scipy.special import betainc, gammainc, ndtri


def _bisect(cdf, u, lo, hi, iters=200):
    u = np.asarray(u, dtype=float)
    lo = np.full_like(u, lo, dtype=float)
    hi = np.full_like(u, hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def gamma_quantile(shape, rate, u):
    """Quantiles of Gamma(shape, rate) by bisection on gammainc."""
    mean = shape / rate
    sd = np.sqrt(shape) / rate
    hi = mean + 20.0 * sd + 10.0 / rate
    while gammainc(shape, rate * hi) < np.max(u):
        hi *= 2.0
    return _bisect(lambda x: gammainc(shape, rate * x), u, 0.0, hi)


def beta_quantile(a, b, u):
    """Quantiles of Beta(a, b) by bisection on betainc."""
    return _bisect(lambda x: betainc(a, b, x), u, 0.0, 1.0)


def normal_quantile(mu, sigma, u):
    return mu + sigma * ndtri(np.asarray(u, dtype=float))


def gamma_sd(shape, rate):
    return np.sqrt(shape) / rate


def beta_sd(a, b):
    return np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
