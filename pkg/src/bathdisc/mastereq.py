"""Second-order (weak coupling) master equation for a two-level system.

The system ``H_s = omega_s sigma^+ sigma^-`` couples through an operator ``d``
(``sigma^-`` or ``sigma_x``) to a bosonic bath at inverse temperature
``beta``.  The equation is time local in ``rho``::

    d rho / dt = -i [H_s, rho] + [d^dag, rho B^dag] + [B rho, d]
                 + [A rho, d^dag] + [d, rho A^dag]

with ``A(t) = int_0^t alpha_1(s) d(-s) ds`` and
``B(t) = int_0^t alpha_2(s) d^dag(-s) ds``, where ``d(-s)`` is the
interaction-picture operator at time ``-s`` and ``alpha_1``, ``alpha_2`` are
the bath correlation functions.  Matrices use the basis ``(e, g)``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_scalar
from .direct import DiscreteBath
from .orthopoly import EXTENDED_THRESHOLD, bsdo_discretize
from .exceptions import ConfigError, StepSizeError
from .quadrature import cumulative_integral
from .spectral import CaldeiraLeggett, SpectralDensity, fourier_transform
from .timeseries import TimeGrid, TimeSeries

__all__ = ["BathCorrelation", "DensityMatrix2", "MESolution", "ThermalDensity", "bose",
           "correlation_functions", "gamma_integral", "integrate_me", "thermal_bsdo",
           "SIGMA_MINUS", "SIGMA_PLUS", "SIGMA_X"]

log = logging.getLogger(__name__)

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_X = SIGMA_MINUS + SIGMA_PLUS
EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)

STEP_TOL = 1e-6


def bose(omega, beta):
    """Occupation ``1 / (exp(beta omega) - 1)``; zero at ``beta = inf``."""
    omega = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        return np.zeros_like(omega)
    return 1.0 / np.expm1(beta * omega)


@dataclass(frozen=True, eq=False)
class BathCorrelation:
    """``alpha_1(t)`` and ``alpha_2(t)`` on a common grid."""

    alpha1: TimeSeries
    alpha2: TimeSeries
    beta: float
    source: str = ""

    @property
    def grid(self):
        return self.alpha1.grid

    @property
    def alpha_total(self):
        """``alpha_T = alpha_1 + conj(alpha_2)``."""
        return self.alpha1.values + np.conj(self.alpha2.values)


@dataclass(frozen=True, eq=False)
class DensityMatrix2:
    """Two-level density matrix in the ``(e, g)`` basis."""

    matrix: np.ndarray

    @property
    def population(self):
        return float(self.matrix[0, 0].real)

    @property
    def coherence(self):
        return float(abs(self.matrix[0, 1]))

    @property
    def trace(self):
        return complex(np.trace(self.matrix))


@dataclass(frozen=True, eq=False)
class MESolution:
    """Density matrices on a time grid plus the step-halving defect."""

    grid: TimeGrid
    rho: np.ndarray = field(repr=False)
    defect: float = 0.0
    coupling: str = "sigma_x"

    def __len__(self):
        return self.grid.count

    def __getitem__(self, k):
        return DensityMatrix2(self.rho[k])

    @property
    def population(self):
        return TimeSeries(self.grid, self.rho[:, 0, 0].real.copy(), "population")

    @property
    def coherence(self):
        return TimeSeries(self.grid, np.abs(self.rho[:, 0, 1]), "coherence")

    def trace_error(self):
        return float(np.max(np.abs(np.trace(self.rho, axis1=1, axis2=2) - 1.0)))

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - np.conj(np.swapaxes(self.rho, 1, 2)))))


def _check_thermal_source(J, beta):
    a, b = J.support
    if a < 0:
        raise ConfigError("finite temperature needs a density supported on omega >= 0",
                          "mastereq.beta")
    if a == 0:
        if isinstance(J, CaldeiraLeggett):
            if J.s <= 0:
                raise ConfigError(
                    f"Bose factor diverges at omega=0 for s={J.s} <= 0", "mastereq.beta")
        elif float(J(np.array([0.0]))[0]) > 0:
            raise ConfigError("J(0) > 0: thermal correlation integral diverges at omega=0",
                              "mastereq.beta")


class ThermalDensity(SpectralDensity):
    """``J(w) (n(w) + 1)``, the weight behind ``alpha_1`` at inverse temperature ``beta``.

    For a sub-ohmic ``J`` this has an integrable singularity at ``w = 0``;
    the value at exactly zero is reported as 0 (quadrature never samples it).
    """

    def __init__(self, J, beta):
        beta = float(beta)
        if not beta > 0:
            raise ConfigError("beta must be positive", "mastereq.beta")
        if not math.isinf(beta):
            _check_thermal_source(J, beta)
        self.J = J
        self.beta = beta
        self.support = J.support

    def _evaluate(self, x):
        j = self.J(x)
        if math.isinf(self.beta):
            return j
        out = np.zeros_like(j)
        pos = x > 0
        out[pos] = j[pos] / -np.expm1(-self.beta * x[pos])
        return out

    @property
    def breakpoints(self):
        return self.J.breakpoints

    @property
    def family(self):
        return f"thermal:{self.J.family}"


def thermal_bsdo(J, n_modes, beta, precision="auto", threshold=EXTENDED_THRESHOLD):
    """Gauss rule of ``J (n + 1)`` turned into physical modes.

    Nodes ``x_k`` and Christoffel weights ``W_k`` of the thermal weight give
    couplings ``W_k / (n(x_k) + 1)``, so the mode sum for ``alpha_1`` is the
    Gauss rule applied to ``exp(-i w t)`` and ``alpha_2`` is the same rule
    applied to ``exp(-beta w) exp(i w t)``.  At zero temperature this is
    plain BSDO.
    """
    if math.isinf(float(beta)):
        return bsdo_discretize(J, n_modes, precision, threshold)
    rule = bsdo_discretize(ThermalDensity(J, beta), n_modes, precision, threshold)
    w = rule.weights / (bose(rule.energies, beta) + 1.0)
    return DiscreteBath.from_modes(rule.energies, w, "bsdo_thermal", J.support,
                                   beta=float(beta))


def correlation_functions(source, beta, grid, tol=1e-10):
    """Bath correlation functions on ``grid``.

    ``alpha_1(t) = int J (n + 1) exp(-i w t)`` and
    ``alpha_2(t) = int J n exp(+i w t)`` for a continuous density, or the
    corresponding mode sums for a :class:`DiscreteBath`.  ``beta = inf``
    means zero temperature.
    """
    beta = float(beta)
    if not (beta > 0):
        raise ConfigError("beta must be positive (inf for zero temperature)", "mastereq.beta")
    times = grid.times
    zero_t = math.isinf(beta)
    if isinstance(source, DiscreteBath):
        x, w = source.energies, source.weights
        if not zero_t and np.any(x <= 0):
            raise ConfigError("finite temperature needs positive mode energies",
                              "mastereq.beta")
        n = bose(x, beta)
        a1 = (w * (n + 1)) @ np.exp(-1j * np.outer(x, times))
        a2 = (w * n) @ np.exp(1j * np.outer(x, times)) if not zero_t else np.zeros(times.size, complex)
        tag = f"discrete:{source.method}:{source.n_modes}"
    elif isinstance(source, SpectralDensity):
        if not zero_t:
            _check_thermal_source(source, beta)
        bp = source.breakpoints
        a1 = fourier_transform(lambda x: source(x) * (bose(x, beta) + 1.0), source.support,
                               times, sign=-1, breakpoints=bp, tol=tol)
        if zero_t:
            a2 = np.zeros(times.size, dtype=complex)
        else:
            a2 = fourier_transform(lambda x: source(x) * bose(x, beta), source.support,
                                   times, sign=+1, breakpoints=bp, tol=tol)
        tag = f"continuous:{source.family}"
    else:
        raise ConfigError("source must be a SpectralDensity or DiscreteBath", "source")
    return BathCorrelation(TimeSeries(grid, a1, "alpha1"), TimeSeries(grid, a2, "alpha2"),
                           beta, tag)


def gamma_integral(corr, omega_s, grid=None):
    """``Gamma(t) = int_0^t alpha_T(tau) exp(i omega_s tau) dtau`` (trapezoid).

    Evaluated on the correlation grid and, if given, sampled on ``grid``
    (whose step must be a multiple of the correlation step).
    """
    cg = corr.grid
    integrand = corr.alpha_total * np.exp(1j * omega_s * cg.times)
    vals = cumulative_integral(integrand, cg.dt, "trapezoid")
    out = TimeSeries(cg, vals, "Gamma")
    if grid is None:
        return out
    factor = _refinement(cg, grid)
    return TimeSeries(grid, vals[::factor][:grid.count], "Gamma")


def _refinement(fine, coarse):
    ratio = coarse.dt / fine.dt
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise ConfigError(f"grid step {coarse.dt} is not a multiple of {fine.dt}", "time.dt")
    if (coarse.count - 1) * factor > fine.count - 1:
        raise ConfigError("correlation grid is shorter than the integration grid", "time")
    return factor


def _history(corr, omega_s, coupling, method):
    """``A(t)`` and ``B(t)`` as arrays of 2x2 matrices on the correlation grid."""
    t = corr.grid.times
    dt = corr.grid.dt
    a1, a2 = corr.alpha1.values, corr.alpha2.values
    ep, em = np.exp(1j * omega_s * t), np.exp(-1j * omega_s * t)
    # d(-s) = sigma^- e^{i w s} (+ sigma^+ e^{-i w s} for sigma_x)
    i1p = cumulative_integral(a1 * ep, dt, method)
    i2m = cumulative_integral(a2 * em, dt, method)
    A = i1p[:, None, None] * SIGMA_MINUS
    B = i2m[:, None, None] * SIGMA_PLUS
    if coupling == "sigma_x":
        i1m = cumulative_integral(a1 * em, dt, method)
        i2p = cumulative_integral(a2 * ep, dt, method)
        A = A + i1m[:, None, None] * SIGMA_PLUS
        B = B + i2p[:, None, None] * SIGMA_MINUS
    return A, B


def _rhs(rho, H, d, A, B):
    dd = d.conj().T
    Bd = B.conj().T
    Ad = A.conj().T
    out = -1j * (H @ rho - rho @ H)
    x = rho @ Bd
    out += dd @ x - x @ dd
    x = B @ rho
    out += x @ d - d @ x
    x = A @ rho
    out += x @ dd - dd @ x
    x = rho @ Ad
    out += d @ x - x @ d
    return out


def _rk4(rho0, H, d, A, B, stride, n_steps, h):
    """Fixed-step RK4; ``A[k * stride]`` is the history at step ``k``."""
    rho = np.empty((n_steps + 1, 2, 2), dtype=complex)
    rho[0] = rho0
    half = stride // 2
    for k in range(n_steps):
        i0 = k * stride
        r = rho[k]
        k1 = _rhs(r, H, d, A[i0], B[i0])
        k2 = _rhs(r + 0.5 * h * k1, H, d, A[i0 + half], B[i0 + half])
        k3 = _rhs(r + 0.5 * h * k2, H, d, A[i0 + half], B[i0 + half])
        k4 = _rhs(r + h * k3, H, d, A[i0 + stride], B[i0 + stride])
        rho[k + 1] = r + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def integrate_me(omega_s, corr, coupling="sigma_x", grid=None, rho0=None,
                 history="cubic", step_tol=STEP_TOL, check=True):
    """Solve the master equation with fixed-step RK4.

    Parameters
    ----------
    omega_s : float
        Level splitting.
    corr : BathCorrelation
        Correlation functions on a grid with half the integrator step (or a
        finer one by an even factor).
    coupling : {"sigma_x", "sigma_minus"}
    grid : TimeGrid, optional
        Integrator grid; defaults to every second correlation sample.
    rho0 : array_like, optional
        Initial state, by default the excited-state projector.
    history : {"cubic", "trapezoid"}
        Rule for the running memory integrals on the correlation grid.
    check : bool
        Compare with a run of twice the step; a difference above
        ``step_tol`` raises :class:`StepSizeError`.

    Returns
    -------
    MESolution
    """
    omega_s = check_scalar(omega_s, "omega_s")
    if coupling not in ("sigma_x", "sigma_minus"):
        raise ConfigError(f"unknown coupling {coupling!r}", "mastereq.coupling")
    cg = corr.grid
    if grid is None:
        grid = TimeGrid(2 * cg.dt, (cg.count - 1) // 2 + 1)
    stride = _refinement(cg, grid)
    if stride % 2:
        raise ConfigError("the correlation grid must refine the integrator grid by an "
                          "even factor", "time.dt")
    rho0 = EXCITED if rho0 is None else np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ConfigError("rho0 must be a 2x2 matrix", "rho0")
    H = np.diag([omega_s, 0.0]).astype(complex)
    d = SIGMA_X if coupling == "sigma_x" else SIGMA_MINUS
    A, B = _history(corr, omega_s, coupling, history)
    n_steps = grid.count - 1
    rho = _rk4(rho0, H, d, A, B, stride, n_steps, grid.dt)
    defect = 0.0
    if check and n_steps >= 2:
        coarse = _rk4(rho0, H, d, A, B, 2 * stride, n_steps // 2, 2 * grid.dt)
        defect = float(np.max(np.abs(coarse - rho[: 2 * (n_steps // 2) + 1: 2])))
        if defect > step_tol:
            raise StepSizeError(
                f"step-halving defect {defect:.2e} exceeds {step_tol:.0e}; reduce dt",
                defect=defect)
    return MESolution(grid, rho, defect, coupling)
