"""Bessel functions of the first kind and Chebyshev expansion coefficients.

``exp(-i x t)`` on ``[a, b]`` expanded in Chebyshev polynomials has
coefficients proportional to ``J_n((b - a) t / 2)``; their size measures how
fast a polynomial (hence Gauss) approximation of the time evolution fails.
"""

import math

import numpy as np

from ._validation import check_scalar, check_support
from .exceptions import NumericalError

__all__ = ["bessel_j", "bessel_j_series", "chebyshev_remainder"]

_SERIES_MAX_X = 2.0


def bessel_j_series(n, x, terms=60):
    """Power series ``sum_m (-1)^m (x/2)^(2m+n) / (m! (m+n)!)``."""
    n = int(n)
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    for m in range(1, terms):
        term *= -half * half / (m * (m + n))
        total += term
        if abs(term) <= 1e-18 * abs(total):
            break
    return total


def _miller(nmax, x):
    """J_0 .. J_nmax at ``x > 0`` by normalized downward recurrence."""
    start = max(nmax, int(x)) + 20 + int(math.sqrt(40.0 * max(nmax, x, 1.0)))
    start += start % 2
    out = np.zeros(nmax + 1)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = 2.0 * k / x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:  # rescale everything computed so far
            j_next *= 1e-250
            j_cur *= 1e-250
            out *= 1e-250
            norm *= 1e-250
        if k - 1 <= nmax:
            out[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
    norm += j_cur  # J_0
    return out / norm


def bessel_j(n, x):
    """``J_n(x)`` for integer ``n >= 0`` and real ``x``.

    Miller's downward recurrence, normalized with ``J_0 + 2 sum J_2k = 1``.
    For small ``|x|`` the result is cross-checked against the power series.

    Examples
    --------
    >>> round(bessel_j(0, 1.0), 12)
    0.765197686558
    """
    n = check_scalar(n, "n", min_val=0, integer=True)
    x = float(x)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    sign = -1.0 if (x < 0 and n % 2) else 1.0
    ax = abs(x)
    val = _miller(n, ax)[n]
    if ax <= _SERIES_MAX_X:
        ref = bessel_j_series(n, ax)
        if abs(val - ref) > 1e-12 * max(abs(ref), 1e-300) and abs(val - ref) > 1e-300:
            raise NumericalError(
                f"Bessel J_{n}({ax}): recurrence {val!r} disagrees with series {ref!r}")
    return sign * val


def chebyshev_remainder(n, t, a, b):
    """``|c_n| = 2 / (b - a) * |J_n((b - a) t / 2)|``.

    Size of the ``n``-th Chebyshev coefficient of ``exp(-i x t)`` on
    ``[a, b]`` (in the normalization where ``c_0(0) = 2 / (b - a)``).
    """
    n = check_scalar(n, "n", min_val=0, integer=True)
    t = check_scalar(t, "t")
    a, b = check_support((a, b))
    return 2.0 / (b - a) * abs(bessel_j(n, 0.5 * (b - a) * t))
