import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bathdisc.exceptions import ConfigError, OnSupportError, PoleError
from bathdisc.spectral import (CaldeiraLeggett, Flat, GaussianMix, Tabulated,
                               broadened_density, density_from_config, eval_density,
                               fourier_transform, hybridization, lambda_time,
                               principal_value, system_greens_real_axis, total_weight)
from bathdisc.timeseries import TimeGrid

from conftest import tabulated_densities

SUBOHMIC = CaldeiraLeggett(1.0, 0.5, 10.0, 50.0)


def test_caldeira_leggett_value_at_cutoff():
    mp = mpmath.mpf(10) ** 0.5 * mpmath.mpf(10) ** 0.5 * mpmath.e ** -1
    assert eval_density(SUBOHMIC, 10.0) == pytest.approx(float(mp), rel=1e-14)
    assert eval_density(SUBOHMIC, 10.0) == pytest.approx(3.678794, abs=1e-6)


@pytest.mark.parametrize("J", [SUBOHMIC, Flat(1.0, (-1, 1)), GaussianMix((-1.0, 2.0)),
                               Tabulated([0, 1, 2], [1, 2, 0.5])])
def test_zero_outside_support(J):
    a, b = J.support
    assert eval_density(J, b + 1) == 0.0
    assert eval_density(J, a - 1) == 0.0


def test_flat_value():
    assert eval_density(Flat(1.0, (-1, 1)), 0.3) == 1.0


def test_total_weights():
    assert total_weight(Flat(1.0, (-1, 1))) == pytest.approx(2.0, rel=1e-14)
    cl = CaldeiraLeggett(1.0, 1.0, 1.0, 60.0)
    assert total_weight(cl) == pytest.approx(1 - 61 * math.exp(-60), rel=1e-12)
    assert total_weight(Tabulated([0, 1], [1, 1])) == pytest.approx(1.0, rel=1e-14)


def test_invalid_parameters_rejected():
    with pytest.raises(ConfigError):
        CaldeiraLeggett(-1.0, 0.5, 10, 50)
    with pytest.raises(ConfigError):
        GaussianMix((0.0,), eta=0.0)
    with pytest.raises(ConfigError):
        Tabulated([0, 2, 1], [1, 1, 1])


def test_hybridization_off_support_log3():
    assert hybridization(Flat(1.0, (-1, 1)), 2.0) == pytest.approx(math.log(3), rel=1e-12)


def test_hybridization_zero_density():
    assert hybridization(Flat(0.0, (-1, 1)), 0.5j) == 0


def test_hybridization_imaginary_axis_against_quad():
    z = 1j
    re = integrate.quad(lambda x: (1 / (z - x)).real, -1, 1, epsabs=1e-13, epsrel=1e-13)[0]
    im = integrate.quad(lambda x: (1 / (z - x)).imag, -1, 1, epsabs=1e-13, epsrel=1e-13)[0]
    val = hybridization(Flat(1.0, (-1, 1)), z)
    assert abs(val - complex(re, im)) < 1e-10 * abs(val)
    assert val == pytest.approx(-2j * math.atan(1.0), rel=1e-12)


def test_hybridization_on_support_rejected():
    with pytest.raises(OnSupportError):
        hybridization(Flat(1.0, (-1, 1)), 0.3)


def test_broadened_density_converges_linearly():
    J = Flat(1.0, (-1, 1))
    errs = [abs(broadened_density(J, 0.0, eta) - 1) for eta in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    for eta, e in zip((1e-2, 1e-3, 1e-4), errs):
        assert e == pytest.approx(2 * eta / math.pi, rel=1e-2)


def test_broadened_density_tail_bound():
    J = Flat(1.0, (-1, 1))
    x, eta = 11.0, 1e-2
    val = broadened_density(J, x, eta)
    assert 0 <= val <= eta * 2.0 / (math.pi * (x - 1) ** 2)


def test_broadened_zero_density():
    assert broadened_density(Flat(0.0, (-1, 1)), 0.2, 1e-3) == 0


def test_lambda_time_flat_sinc():
    grid = TimeGrid(math.pi / 8, 17)
    lam = lambda_time(Flat(1.0, (-1, 1)), grid)
    t = grid.times
    exact = np.where(t == 0, 2.0, 2 * np.sin(t) / np.where(t == 0, 1, t))
    assert np.max(np.abs(lam.values - exact)) < 1e-10
    assert abs(lam.values[8]) < 1e-10  # t = pi


def test_lambda_time_subohmic_against_quad():
    val = lambda_time(SUBOHMIC, TimeGrid(1.0, 2)).values[1]
    re = integrate.quad(SUBOHMIC, 0, 50, weight="cos", wvar=1.0, epsabs=1e-13, limit=500)[0]
    im = -integrate.quad(SUBOHMIC, 0, 50, weight="sin", wvar=1.0, epsabs=1e-13, limit=500)[0]
    assert abs(val - complex(re, im)) < 1e-8


def test_lambda_time_at_zero_is_total_weight():
    for J in (SUBOHMIC, GaussianMix((-4.0, 0.0, 4.0))):
        assert lambda_time(J, TimeGrid(0.1, 1)).values[0].real == pytest.approx(
            J.total_weight, rel=1e-12)


def test_fourier_sign():
    J = Flat(1.0, (0, 1))
    t = np.array([2.0])
    minus = fourier_transform(J, J.support, t, sign=-1)[0]
    plus = fourier_transform(J, J.support, t, sign=+1)[0]
    assert plus == pytest.approx(np.conj(minus), abs=1e-13)
    assert minus == pytest.approx((1 - np.exp(-2j)) / 2j, abs=1e-13)


def test_system_greens_free_and_flat():
    g = system_greens_real_axis(Flat(0.0, (-1, 1)), 0.0, 1.0, 1e-6)
    assert g == pytest.approx(1 / (1 + 1e-6j), rel=1e-12)
    g = system_greens_real_axis(Flat(1.0, (-1, 1)), 0.0, 2.0, 1e-8)
    assert g == pytest.approx(1 / (2 + math.log(3)), abs=1e-6)
    gm = system_greens_real_axis(Flat(1.0, (-1, 1)), 0.0, 2.0, 1e-8, sign=-1)
    assert gm == pytest.approx(1 / (2 - math.log(3)), abs=1e-6)
    g0p = system_greens_real_axis(Flat(0.0, (-1, 1)), 0.3, 1.0, 1e-3, sign=+1)
    g0m = system_greens_real_axis(Flat(0.0, (-1, 1)), 0.3, 1.0, 1e-3, sign=-1)
    assert g0p == g0m


def test_system_greens_pole():
    with pytest.raises(PoleError):
        system_greens_real_axis(Flat(0.0, (-1, 1)), 1.0, 1.0, 1e-310)


def test_kramers_kronig_consistency():
    J = Flat(1.0, (-1, 1))
    re = hybridization(J, 2.0 + 1e-4j).real
    assert re == pytest.approx(principal_value(J, 2.0), abs=1e-4)


def test_principal_value_on_support():
    # PV int_{-1}^{1} dy / (x - y) = ln((1 + x) / (1 - x))
    assert principal_value(Flat(1.0, (-1, 1)), 0.5) == pytest.approx(math.log(3), rel=1e-9)


def test_config_roundtrip_and_errors(tmp_path):
    J = density_from_config(SUBOHMIC.to_config())
    assert J == SUBOHMIC
    with pytest.raises(ConfigError) as exc:
        density_from_config({"family": "flat", "heigth": 1})
    assert exc.value.path == "density"
    with pytest.raises(ConfigError):
        density_from_config({"family": "nope"})
    f = tmp_path / "j.txt"
    f.write_text("# x value\n0 1\n1 3\n")
    J = density_from_config({"family": "tabulated", "grid_file": "j.txt"}, tmp_path)
    assert total_weight(J) == pytest.approx(2.0)


@given(tabulated_densities(), st.lists(st.floats(0, 30), min_size=1, max_size=10))
def test_lambda_bounded_by_total_weight(J, ts):
    vals = fourier_transform(J, J.support, np.array(ts), breakpoints=J.breakpoints)
    assert np.all(np.abs(vals) <= J.total_weight * (1 + 1e-10))


@given(tabulated_densities(), st.floats(-5, 5), st.floats(1e-4, 1.0))
def test_broadened_density_nonnegative(J, x, eta):
    assert broadened_density(J, x, eta) >= -1e-12
