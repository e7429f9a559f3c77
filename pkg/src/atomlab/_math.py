from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, xlogy


def log_factorial(x):
    """ln(x!) for scalars or arrays of non-negative integers."""
    if np.ndim(x) == 0:
        return math.lgamma(float(x) + 1.0)
    return gammaln(np.asarray(x, dtype=float) + 1.0)


def sum_log_factorial(x) -> float:
    return float(np.sum(log_factorial(np.asarray(x))))


def log_binomial(a: int, b: int) -> float:
    if b < 0 or b > a:
        return -math.inf
    b = min(b, a - b)
    if b <= 2000:
        # exact big-integer route avoids cancellation between large lgammas
        return math.log(math.comb(a, b))
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def xlogx(x):
    return xlogy(x, x)


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    out = -xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)
    return float(out) if out.ndim == 0 else out


def log_poisson_self(d):
    """ln pi(d) with pi(k) = k^k e^-k / k!, summed over an array."""
    d = np.asarray(d, dtype=float)
    return float(np.sum(xlogx(d) - d - gammaln(d + 1.0)))
