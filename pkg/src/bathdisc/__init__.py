"""Discretization of continuous bath spectral densities.

Direct (interval, mean, equal-weight) and orthogonal-polynomial (Gauss)
discretizations, star/chain mappings, exact single-particle and small
many-body time evolution, and a weak-coupling master equation for
benchmarking how long a discrete bath reproduces the continuum.
"""

__version__ = "0.1.0"

from .chain import lanczos_tridiagonalize, star_from_chain
from .direct import (DiscreteBath, IntervalPartition, equal_weight_method,
                     interval_discretize, linear_partition, log_partition, mean_method,
                     trapezoid_discretize)
from .estimators import BathDiscretizer, ChainMapper, SingleParticleEvolver, discretize
from .evolve import (SingleParticleModel, greens_function, population, reference_solution,
                     tmax_empirical, tmax_predict, tmax_rise)
from .exceptions import (BathDiscError, CertificationError, ConfigError, NumericalError,
                         StepSizeError)
from .orthopoly import (ChainCoefficients, bsdo_discretize, chain_from_weight, golub_welsch,
                        legendre_discretize, stieltjes_recurrence)
from .spectral import CaldeiraLeggett, Flat, GaussianMix, SpectralDensity, Tabulated
from .timeseries import TimeGrid, TimeSeries

__all__ = [
    "BathDiscError", "BathDiscretizer", "CaldeiraLeggett", "CertificationError",
    "ChainCoefficients", "ChainMapper", "ConfigError", "DiscreteBath", "Flat",
    "GaussianMix", "IntervalPartition", "NumericalError", "SingleParticleEvolver",
    "SingleParticleModel", "SpectralDensity", "StepSizeError", "Tabulated", "TimeGrid",
    "TimeSeries", "bsdo_discretize", "chain_from_weight", "discretize",
    "equal_weight_method", "golub_welsch", "greens_function", "interval_discretize",
    "lanczos_tridiagonalize", "legendre_discretize", "linear_partition", "log_partition",
    "mean_method", "population", "reference_solution", "star_from_chain",
    "stieltjes_recurrence", "tmax_empirical", "tmax_predict", "tmax_rise",
    "trapezoid_discretize",
]
