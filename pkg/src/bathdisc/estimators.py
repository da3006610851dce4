"""Estimator-style wrappers (``fit`` / ``transform`` / ``predict``).

The objects follow scikit-learn conventions: hyperparameters are stored
unmodified by ``__init__`` (so ``get_params`` / ``set_params`` / ``clone``
work), learned state ends in an underscore, and methods called before
``fit`` raise ``NotFittedError``.  Inputs are spectral densities, baths and
time grids rather than 2-D arrays.
"""

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_precision, check_scalar
from .chain import lanczos_tridiagonalize, star_from_chain
from .direct import (DiscreteBath, equal_weight_method, interval_discretize,
                     linear_partition, log_partition, mean_method, trapezoid_discretize)
from .evolve import SingleParticleModel, error_series, greens_function, population
from .exceptions import ConfigError
from .orthopoly import EXTENDED_THRESHOLD, bsdo_discretize, legendre_discretize
from .spectral import SpectralDensity

__all__ = ["METHODS", "discretize", "BathDiscretizer", "ChainMapper", "SingleParticleEvolver"]

METHODS = ("trapezoid", "linear", "log", "mean", "equal_weight", "bsdo", "legendre")


def discretize(J, method, n_modes, precision="auto", *, log_lambda=2.0, x_accum=0.0,
               threshold=EXTENDED_THRESHOLD):
    """Dispatch to one of the discretization schemes by name."""
    if not isinstance(J, SpectralDensity):
        raise TypeError("J must be a SpectralDensity")
    n = check_scalar(n_modes, "N_b", min_val=1, integer=True)
    a, b = J.support
    if method == "trapezoid":
        return trapezoid_discretize(J, n)
    if method == "linear":
        return interval_discretize(J, linear_partition(a, b, n), "linear")
    if method == "log":
        return interval_discretize(J, log_partition(a, b, n, log_lambda, x_accum), "log")
    if method == "mean":
        return mean_method(J, n)
    if method == "equal_weight":
        return equal_weight_method(J, n)
    if method == "bsdo":
        return bsdo_discretize(J, n, precision, threshold)
    if method == "legendre":
        return legendre_discretize(J, n, precision, threshold)
    raise ConfigError(f"unknown method {method!r}; expected one of {list(METHODS)}", "method")


class BathDiscretizer(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    """Turn a continuous spectral density into a :class:`DiscreteBath`.

    Parameters
    ----------
    method : str
        One of :data:`METHODS`.
    n_modes : int
    precision : {"auto", "double", "extended"}
    log_lambda, x_accum : float
        Parameters of the logarithmic partition.

    Attributes
    ----------
    bath_ : DiscreteBath
    density_ : SpectralDensity

    Examples
    --------
    >>> from bathdisc.spectral import Flat
    >>> BathDiscretizer("bsdo", 2).fit(Flat(0.5, (-1, 1))).bath_.n_modes
    2
    """

    def __init__(self, method="bsdo", n_modes=10, precision="auto", log_lambda=2.0,
                 x_accum=0.0):
        self.method = method
        self.n_modes = n_modes
        self.precision = precision
        self.log_lambda = log_lambda
        self.x_accum = x_accum

    def fit(self, J, y=None):
        check_precision(self.precision)
        self.density_ = J
        self.bath_ = discretize(J, self.method, self.n_modes, self.precision,
                                log_lambda=self.log_lambda, x_accum=self.x_accum)
        return self

    def transform(self, J=None):
        """The fitted bath (a new density is discretized with the same settings)."""
        check_is_fitted(self, "bath_")
        if J is None or J is self.density_:
            return self.bath_
        return discretize(J, self.method, self.n_modes, self.precision,
                          log_lambda=self.log_lambda, x_accum=self.x_accum)


class ChainMapper(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    """Star bath to chain coefficients (Lanczos) and back."""

    def __init__(self, precision="auto"):
        self.precision = precision

    def fit(self, bath, y=None):
        if not isinstance(bath, DiscreteBath):
            raise TypeError("ChainMapper.fit expects a DiscreteBath")
        check_precision(self.precision)
        self.chain_ = lanczos_tridiagonalize(bath, self.precision)
        self.n_sites_ = self.chain_.n_sites
        return self

    def transform(self, bath=None):
        check_is_fitted(self, "chain_")
        if bath is None:
            return self.chain_
        return lanczos_tridiagonalize(bath, self.precision)

    def inverse_transform(self, chain):
        check_is_fitted(self, "chain_")
        prec = "extended" if self.precision == "extended" else "double"
        return star_from_chain(chain, prec)


class SingleParticleEvolver(BaseEstimator):
    """Exact evolution of a level coupled to a discrete bath.

    ``predict(grid)`` returns the population ``|G(t)|^2`` or the Green's
    function ``G(t)`` depending on ``quantity``; ``score`` is minus the
    largest deviation from a reference series.
    """

    def __init__(self, epsilon0=0.0, geometry="star", quantity="population",
                 fermi_level=None, solver="auto"):
        self.epsilon0 = epsilon0
        self.geometry = geometry
        self.quantity = quantity
        self.fermi_level = fermi_level
        self.solver = solver

    def fit(self, bath=None, y=None):
        if self.quantity not in ("population", "greens"):
            raise ConfigError(f"unknown quantity {self.quantity!r}", "quantity")
        self.model_ = SingleParticleModel(self.epsilon0, bath, self.geometry)
        return self

    def predict(self, grid):
        check_is_fitted(self, "model_")
        if self.quantity == "population":
            return population(self.model_, grid, self.solver)
        return greens_function(self.model_, grid, self.fermi_level, self.solver)

    def score(self, grid, reference):
        return -float(error_series(reference, self.predict(grid)).values.max())
