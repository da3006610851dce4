import mpmath
import pytest
from hypothesis import given, strategies as st

from bathdisc.bessel import bessel_j, bessel_j_series, chebyshev_remainder


@pytest.mark.parametrize("n,x", [(0, 1.0), (1, 0.5), (5, 2.0), (0, 10.0), (20, 10.0),
                                 (3, 37.5), (100, 80.0), (7, -3.0)])
def test_against_mpmath(n, x):
    ref = float(mpmath.besselj(n, x))
    assert bessel_j(n, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@given(st.integers(0, 60), st.floats(0.01, 60.0))
def test_random_against_mpmath(n, x):
    ref = float(mpmath.besselj(n, x))
    assert abs(bessel_j(n, x) - ref) <= 1e-12 * max(abs(ref), 1e-3)


def test_series_small_argument():
    assert bessel_j_series(0, 1.0) == pytest.approx(float(mpmath.besselj(0, 1)), rel=1e-15)


def test_remainder_at_zero_time():
    assert chebyshev_remainder(0, 0.0, -1, 3) == pytest.approx(0.5)
    assert chebyshev_remainder(4, 0.0, -1, 3) == 0.0


def test_remainder_decay_beyond_argument():
    a, b = -1.0, 1.0
    t = 10.0  # t' = (b - a) t / 2 = 10
    c0 = chebyshev_remainder(0, t, a, b)
    c20 = chebyshev_remainder(20, t, a, b)
    assert c20 == pytest.approx(abs(float(mpmath.besselj(20, 10))), rel=1e-12)
    # the coefficient is tiny once n exceeds t' and falls super-exponentially
    assert c20 / c0 < 1e-4
    ratios = [chebyshev_remainder(n + 5, t, a, b) / chebyshev_remainder(n, t, a, b)
              for n in (15, 20, 25, 30)]
    assert all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))
