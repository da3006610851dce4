import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import eigh

from bathdisc.direct import DiscreteBath, interval_discretize, linear_partition
from bathdisc.estimators import SingleParticleEvolver
from bathdisc.evolve import (SingleParticleModel, arrowhead_eigen,
                             build_single_particle_matrix, default_dt, error_series,
                             greens_function, lambda_time_discrete, population,
                             reference_solution, spectrum, tmax_empirical, tmax_predict,
                             tmax_rise)
from bathdisc.exceptions import CertificationError, GridMismatchError
from bathdisc.orthopoly import bsdo_discretize, chain_from_weight
from bathdisc.spectral import CaldeiraLeggett, Flat, lambda_time
from bathdisc.timeseries import TimeGrid, TimeSeries

SUBOHMIC = CaldeiraLeggett(1.0, 0.5, 10.0, 50.0)


def test_matrix_isolated_level():
    assert np.array_equal(build_single_particle_matrix(SingleParticleModel(0.7)), [[0.7]])


def test_matrix_flat_two_modes():
    bath = bsdo_discretize(Flat(1.0, (-1, 1)), 2)
    H = build_single_particle_matrix(SingleParticleModel(0.0, bath))
    s = 1 / math.sqrt(3)
    expect = np.array([[0, 1, 1], [1, -s, 0], [1, 0, s]])
    assert np.allclose(H, expect, atol=1e-14)


def test_star_and_chain_spectra_agree():
    bath = bsdo_discretize(SUBOHMIC, 20)
    Hs = build_single_particle_matrix(SingleParticleModel(0.5, bath, "star"))
    Hc = build_single_particle_matrix(SingleParticleModel(0.5, bath, "chain"))
    assert np.allclose(np.linalg.eigvalsh(Hs), np.linalg.eigvalsh(Hc), atol=1e-12)
    assert Hc[0, 1] == pytest.approx(math.sqrt(bath.total_weight), rel=1e-13)


def test_chain_geometry_from_weight():
    chain = chain_from_weight(SUBOHMIC, 12)
    H = build_single_particle_matrix(SingleParticleModel(0.5, chain, "chain"))
    assert H[0, 0] == 0.5 and H[0, 1] == pytest.approx(chain.v_tot)
    assert np.allclose(np.diag(H)[1:], chain.alphas)
    assert np.allclose(np.diag(H, 1)[1:], np.sqrt(chain.betas))


def test_isolated_level_phase():
    grid = TimeGrid(0.1, 50)
    g = greens_function(SingleParticleModel(0.3), grid)
    assert np.allclose(g.values, -1j * np.exp(-0.3j * grid.times), atol=1e-15)


def test_resonant_two_level():
    V, eps = 0.4, 0.2
    model = SingleParticleModel(eps, DiscreteBath([eps], [V**2], support=(0, 1)))
    grid = TimeGrid(0.05, 200)
    g = greens_function(model, grid)
    t = grid.times
    assert g.values[0] == pytest.approx(-1j, abs=1e-15)
    assert np.allclose(g.values, -1j * np.exp(-1j * eps * t) * np.cos(V * t), atol=1e-13)
    p = population(model, grid)
    assert p.values[0] == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(p.values, np.cos(V * t) ** 2, atol=1e-13)


def test_unitarity_and_bound():
    model = SingleParticleModel(0.5, bsdo_discretize(SUBOHMIC, 30))
    E, W = spectrum(model)
    assert np.sum(W) == pytest.approx(1.0, abs=1e-12)
    g = greens_function(model, TimeGrid(0.05, 400))
    assert np.all(np.abs(g.values) <= 1 + 1e-12)


def test_geometry_independence():
    bath = bsdo_discretize(SUBOHMIC, 25)
    grid = TimeGrid(0.02, 300)
    gs = greens_function(SingleParticleModel(0.5, bath, "star"), grid)
    gc = greens_function(SingleParticleModel(0.5, bath, "chain"), grid)
    assert np.max(np.abs(gs.values - gc.values)) < 1e-10


def test_arrowhead_matches_dense():
    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(-2, 2, 300))
    w = rng.uniform(0.001, 0.02, 300)
    E, W = arrowhead_eigen(0.1, x, w)
    H = np.diag(np.concatenate([[0.1], x]))
    H[0, 1:] = H[1:, 0] = np.sqrt(w)
    ev, vec = eigh(H)
    assert np.allclose(E, ev, atol=1e-12)
    assert np.allclose(W, vec[0] ** 2, atol=1e-12)


def test_spectrum_solvers_agree():
    model = SingleParticleModel(0.5, bsdo_discretize(SUBOHMIC, 30))
    E1, W1 = spectrum(model, "dense")
    E2, W2 = spectrum(model, "arrowhead")
    assert np.allclose(E1, E2, atol=1e-11) and np.allclose(W1, W2, atol=1e-12)


def test_lambda_discrete_basic():
    bath = DiscreteBath([0.3], [2.0], support=(0, 1))
    grid = TimeGrid(0.1, 30)
    lam = lambda_time_discrete(bath, grid)
    assert lam.values[0] == pytest.approx(2.0)
    assert np.allclose(np.abs(lam.values), 2.0)
    assert np.allclose(lam.values, 2.0 * np.exp(-0.3j * grid.times))


def test_lambda_discrete_weight_conserving_at_zero():
    for bath in (bsdo_discretize(SUBOHMIC, 10),
                 interval_discretize(SUBOHMIC, linear_partition(0, 50, 10))):
        lam = lambda_time_discrete(bath, TimeGrid(0.1, 2))
        assert lam.values[0].real == pytest.approx(SUBOHMIC.total_weight, rel=1e-12)


def test_lambda_discrete_early_times_flat():
    bath = bsdo_discretize(Flat(1.0, (-1, 1)), 10)
    grid = TimeGrid.until(7.0, 0.05)
    t = grid.times
    exact = 2 * np.sinc(t / np.pi)
    err = np.abs(lambda_time_discrete(bath, grid).values - exact)
    # a 10-point Gauss rule reproduces the first 20 moments: error ~ t^20 / 20!
    assert err[t <= 4.0].max() < 1e-11
    assert err[t <= 3.0].max() < err[t <= 5.0].max() < err.max()
    assert err.max() == pytest.approx(
        np.max(np.abs(lambda_time_discrete(bath, grid).values
                      - lambda_time(Flat(1.0, (-1, 1)), grid).values)), abs=1e-10)


def test_error_series():
    grid = TimeGrid(0.1, 5)
    a = TimeSeries(grid, np.arange(5.0))
    assert np.all(error_series(a, a).values == 0)
    assert np.allclose(error_series(a, TimeSeries(grid, np.arange(5.0) + 0.3)).values, 0.3)
    with pytest.raises(GridMismatchError):
        error_series(a, TimeSeries(TimeGrid(0.2, 5), np.zeros(5)))


def test_tmax_predict():
    assert tmax_predict(31, -5, 5, "system") == pytest.approx(12.6)
    assert tmax_predict(1, -1, 1, "bath") == pytest.approx(1.0)
    assert tmax_predict(65, 0, 50, "bath") == pytest.approx(5.16)


def test_tmax_empirical_detectors():
    grid = TimeGrid(0.01, 1001)
    assert tmax_empirical(TimeSeries(grid, np.zeros(1001))) == math.inf
    step = np.where(grid.times >= 5.0 - 1e-12, 0.01, 0.0)
    assert abs(tmax_empirical(TimeSeries(grid, step)) - 5.0) <= grid.dt
    spike = np.zeros(1001)
    spike[100] = 1.0
    assert tmax_empirical(TimeSeries(grid, spike)) == math.inf
    rise = 1e-8 * np.exp(grid.times)
    assert tmax_rise(TimeSeries(grid, rise)) == pytest.approx(1.0 + math.log(100), abs=0.02)


def test_default_dt():
    assert default_dt(np.array([-100.0, 3.0])) == pytest.approx(math.pi / 1000)
    assert default_dt(np.array([0.1])) == 0.01


def test_reference_zero_density():
    ref = reference_solution(Flat(0.0, (-1, 1)), 0.3, TimeGrid(0.1, 20), 1000,
                             quantity="greens")
    assert np.allclose(np.abs(ref.values), 1.0)


def test_reference_certification_failure():
    with pytest.raises(CertificationError) as exc:
        reference_solution(SUBOHMIC, 0.5, TimeGrid.until(5.0, 0.05), n_ref=40)
    assert exc.value.deviation > 1e-6


def test_subohmic_bsdo_tracks_reference():
    tm = tmax_predict(65, 0, 50, "system")
    grid = TimeGrid.until(tm, 0.01)
    ref = reference_solution(SUBOHMIC, 0.5, grid, 5000)
    assert ref.meta["certificate"] < 1e-6
    err = error_series(ref, population(SingleParticleModel(0.5, bsdo_discretize(SUBOHMIC, 65)),
                                       grid)).values
    assert err[grid.times <= 0.8 * tm].max() < 1e-4


def test_estimator_interface():
    from sklearn.base import clone
    from sklearn.exceptions import NotFittedError
    est = SingleParticleEvolver(epsilon0=0.2, quantity="greens")
    assert clone(est).get_params()["epsilon0"] == 0.2
    with pytest.raises(NotFittedError):
        est.predict(TimeGrid(0.1, 3))
    g = est.fit(None).predict(TimeGrid(0.1, 3))
    assert np.allclose(g.values, -1j * np.exp(-0.2j * g.times))
    assert est.score(TimeGrid(0.1, 3), g) == 0.0


@given(st.integers(1, 15), st.floats(-1, 1), st.integers(0, 2**31 - 1))
def test_population_bounded(n, eps, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-1, 1, n)) + np.arange(n) * 1e-6
    bath = DiscreteBath(x, rng.uniform(0.01, 0.5, n), support=(-1, 1.1))
    p = population(SingleParticleModel(eps, bath), TimeGrid(0.1, 60)).values
    assert p[0] == pytest.approx(1.0) and np.all(p <= 1 + 1e-12) and np.all(p >= 0)
