"""Independent numerical oracles used only by the tests.

Nothing here shares code with the library: the normal CDF is built from a
power-series erf and a continued-fraction erfc, quantiles come from bisection
on that CDF, and binomial tails are exact big-integer summations.  Agreement
between these and the library is therefore evidence, not tautology.
"""

import math

import numpy as np

_SQRT_PI = math.sqrt(math.pi)


def erf_series(x):
    """erf via the alternating Maclaurin series; accurate for |x| <= 3."""
    total = 0.0
    coeff = 1.0  # (-1)^n x^(2n) / n!
    for n in range(0, 200):
        term = coeff * x / (2 * n + 1)
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300):
            break
        coeff *= -x * x / (n + 1)
    return 2.0 * total / _SQRT_PI


def erfc_continued_fraction(x, depth=80):
    """erfc for x > 0 via the Laplace continued fraction, evaluated bottom-up.

    sqrt(pi) e^{x^2} erfc(x) = 1 / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    Converges quickly for x >= 2.
    """
    f = 0.0
    for n in range(depth, 0, -1):
        f = (n / 2.0) / (x + f)
    return math.exp(-x * x) / (_SQRT_PI * (x + f))


def normal_cdf(z):
    """Standard normal CDF from the erf pieces above."""
    x = z / math.sqrt(2.0)
    if x < -3.0:
        return 0.5 * erfc_continued_fraction(-x)
    if x > 3.0:
        return 1.0 - 0.5 * erfc_continued_fraction(x)
    return 0.5 * (1.0 + erf_series(x))


def normal_upper_tail(z):
    """P(Z > z), accurate in the far right tail."""
    x = z / math.sqrt(2.0)
    if x > 3.0:
        return 0.5 * erfc_continued_fraction(x)
    return 1.0 - normal_cdf(z)


def normal_quantile(p, lo=-40.0, hi=40.0, iters=200):
    """Quantile by bisection on the oracle CDF."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binom_upper_tail(k, n, p):
    """P(Bin(n, p) >= k), exact combinatorics times float powers."""
    if k <= 0:
        return 1.0
    total = 0.0
    for j in range(k, n + 1):
        total += math.comb(n, j) * p**j * (1.0 - p) ** (n - j)
    return min(total, 1.0)


def binom_lower_confidence(k, n, alpha, iters=80):
    """Bisection solve of P(Bin(n, p) >= k) = alpha for p."""
    if k == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if binom_upper_tail(k, n, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def central_difference(f, x, h=1e-5):
    """Componentwise central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad
