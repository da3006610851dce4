import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bathdisc.estimators import METHODS, BathDiscretizer, ChainMapper, discretize
from bathdisc.exceptions import ConfigError
from bathdisc.spectral import CaldeiraLeggett, Flat

SUBOHMIC = CaldeiraLeggett(1.0, 0.5, 10.0, 50.0)


SAMPLING = ("trapezoid", "legendre")


@pytest.mark.parametrize("method", [m for m in METHODS if m not in SAMPLING])
def test_integrating_methods_conserve_weight(method):
    bath = discretize(SUBOHMIC, method, 8)
    assert bath.n_modes >= 1
    assert np.all(bath.weights > 0)
    assert bath.total_weight + sum(w for _, w in bath.dropped) == pytest.approx(
        SUBOHMIC.total_weight, rel=1e-9)


@pytest.mark.parametrize("method", SAMPLING)
def test_sampling_methods_converge_in_weight(method):
    errs = [abs(discretize(SUBOHMIC, method, n).total_weight - SUBOHMIC.total_weight)
            for n in (8, 32, 128)]
    assert errs[0] > errs[1] > errs[2]


def test_dispatch_errors():
    with pytest.raises(ConfigError):
        discretize(SUBOHMIC, "spline", 4)
    with pytest.raises(TypeError):
        discretize("flat", "bsdo", 4)


def test_bath_discretizer_params_and_clone():
    est = BathDiscretizer("log", 12, log_lambda=1.5)
    params = est.get_params()
    assert params["method"] == "log" and params["log_lambda"] == 1.5
    twin = clone(est).set_params(n_modes=6)
    assert twin.n_modes == 6 and est.n_modes == 12
    with pytest.raises(NotFittedError):
        est.transform()


def test_bath_discretizer_fit_transform():
    est = BathDiscretizer("bsdo", 4)
    bath = est.fit_transform(SUBOHMIC)
    assert bath is est.bath_ and est.density_ is SUBOHMIC
    other = est.transform(Flat(1.0, (-1, 1)))
    assert other.n_modes == 4 and other is not bath


def test_chain_mapper_round_trip():
    bath = discretize(SUBOHMIC, "bsdo", 10)
    mapper = ChainMapper().fit(bath)
    assert mapper.n_sites_ == 10
    back = mapper.inverse_transform(mapper.transform())
    assert np.allclose(back.energies, bath.energies, rtol=1e-11)
    assert np.allclose(back.weights, bath.weights, rtol=1e-9)
    with pytest.raises(NotFittedError):
        ChainMapper().transform()
    with pytest.raises(TypeError):
        ChainMapper().fit(SUBOHMIC)
