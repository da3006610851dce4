"""Exact real-time evolution of quadratic impurity models.

A single level ``eps0`` coupled to a discrete bath (star or chain) is a
single-particle problem: the Green's function follows from the eigenvalues
``E_n`` of the ``(N_b + 1)``-dimensional matrix and the weights ``W_n`` of the
system site in its eigenvectors::

    G(t) = -i sum_n W_n exp(-i E_n t)

Large star baths (thousands of modes) are diagonalized with an ``O(N^2)``
secular-equation solver instead of a dense eigensolver.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from ._validation import check_scalar, check_support
from .chain import lanczos_tridiagonalize, star_from_chain
from .direct import DiscreteBath, interval_discretize, linear_partition
from .exceptions import CertificationError, ConfigError, ConvergenceError
from .orthopoly import ChainCoefficients
from .spectral import _phase_sums
from .timeseries import TimeGrid, TimeSeries, check_same_grid

__all__ = [
    "SingleParticleModel", "build_single_particle_matrix", "spectrum",
    "greens_function", "population", "lambda_time_discrete", "error_series",
    "tmax_predict", "tmax_empirical", "tmax_rise", "reference_solution",
    "default_dt", "arrowhead_eigen",
]

log = logging.getLogger(__name__)

DENSE_LIMIT = 400
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class SingleParticleModel:
    """System level ``epsilon0`` coupled to ``bath`` in the given geometry.

    ``bath`` may be a :class:`DiscreteBath`, :class:`ChainCoefficients` or
    ``None`` (isolated level).  It is converted to the requested geometry.
    """

    epsilon0: float
    bath: object = None
    geometry: str = "star"

    def __post_init__(self):
        object.__setattr__(self, "epsilon0", check_scalar(self.epsilon0, "epsilon0"))
        if self.geometry not in ("star", "chain"):
            raise ConfigError(f"unknown geometry {self.geometry!r}", "geometry")
        bath = self.bath
        if bath is None:
            return
        if self.geometry == "chain" and isinstance(bath, DiscreteBath):
            bath = lanczos_tridiagonalize(bath)
        elif self.geometry == "star" and isinstance(bath, ChainCoefficients):
            bath = star_from_chain(bath)
        elif not isinstance(bath, (DiscreteBath, ChainCoefficients)):
            raise ConfigError("bath must be a DiscreteBath or ChainCoefficients", "bath")
        object.__setattr__(self, "bath", bath)

    @property
    def n_bath(self):
        return 0 if self.bath is None else len(self.bath)

    @property
    def dim(self):
        return self.n_bath + 1


def build_single_particle_matrix(model):
    """Dense Hermitian matrix with the system site first.

    Star: ``diag(eps0, x_1..x_N)`` bordered by ``V_n = sqrt(weight_n)``.
    Chain: tridiagonal with ``eps0, alpha_0, ...`` on the diagonal and
    ``V_tot, sqrt(beta_1), ...`` beside it.
    """
    n = model.dim
    H = np.zeros((n, n))
    H[0, 0] = model.epsilon0
    bath = model.bath
    if bath is None:
        return H
    if model.geometry == "star":
        idx = np.arange(1, n)
        H[idx, idx] = bath.energies
        H[0, 1:] = H[1:, 0] = bath.couplings
    else:
        diag, off = _chain_arrays(model)
        H[np.arange(n), np.arange(n)] = diag
        H[np.arange(n - 1), np.arange(1, n)] = off
        H[np.arange(1, n), np.arange(n - 1)] = off
    return H


def _chain_arrays(model):
    c = model.bath
    diag = np.concatenate([[model.epsilon0], c.alphas])
    off = np.concatenate([[c.v_tot], c.hoppings])
    return diag, off


def spectrum(model, solver="auto"):
    """Eigenvalues ``E_n`` and system-site weights ``W_n`` (summing to one).

    ``solver`` is ``"dense"``, ``"arrowhead"`` (star geometry only) or
    ``"auto"``.
    """
    bath = model.bath
    if bath is None:
        return np.array([model.epsilon0]), np.ones(1)
    if model.geometry == "chain":
        diag, off = _chain_arrays(model)
        E, vecs = eigh_tridiagonal(diag, off)
        return E, vecs[0] ** 2
    if solver == "auto":
        solver = "arrowhead" if model.dim > DENSE_LIMIT else "dense"
    if solver == "arrowhead":
        return arrowhead_eigen(model.epsilon0, bath.energies, bath.weights)
    E, vecs = eigh(build_single_particle_matrix(model))
    return E, vecs[0] ** 2


def arrowhead_eigen(eps0, x, w, max_iter=100, chunk=256):
    """Eigen-decomposition of a star (arrowhead) matrix via its secular equation.

    The eigenvalues solve ``f(E) = E - eps0 - sum_k w_k / (E - x_k) = 0``
    (one root between consecutive ``x_k`` plus one on either side) and the
    system weights are ``1 / f'(E)``.  Each root is stored as an offset
    ``delta`` from its nearer pole so that roots hugging a pole keep full
    relative accuracy; it is found by Newton's method on ``f`` times the
    adjacent pole factors, safeguarded by bisection.

    Parameters
    ----------
    eps0 : float
    x : ndarray
        Strictly increasing bath energies.
    w : ndarray
        Positive weights ``|V_k|^2``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    n = x.size
    vnorm = math.sqrt(float(np.sum(w)))
    lo_bound = min(eps0, x[0]) - vnorm - 1e-12 * (1 + abs(x[0]))
    hi_bound = max(eps0, x[-1]) + vnorm + 1e-12 * (1 + abs(x[-1]))

    # per root: anchor pole, other pole (nan if none), bracket in delta
    anchor = np.empty(n + 1, dtype=int)
    other = np.full(n + 1, -1, dtype=int)
    lo = np.empty(n + 1)
    hi = np.empty(n + 1)
    anchor[0], lo[0], hi[0] = 0, lo_bound - x[0], 0.0
    anchor[n], lo[n], hi[n] = n - 1, 0.0, hi_bound - x[-1]
    if n > 1:
        gaps = np.diff(x)
        mid = x[:-1] + 0.5 * gaps
        fmid = _secular(mid, eps0, x, w, chunk)
        left = fmid > 0  # root lies in the left half
        i = np.arange(n - 1)
        anchor[1:n] = np.where(left, i, i + 1)
        other[1:n] = np.where(left, i + 1, i)
        lo[1:n] = np.where(left, 0.0, -0.5 * gaps)
        hi[1:n] = np.where(left, 0.5 * gaps, 0.0)

    delta = 0.5 * (lo + hi)
    xa = x[anchor]
    active = np.ones(n + 1, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        for start in range(0, idx.size, chunk):
            sl = idx[start:start + chunk]
            d = delta[sl]
            diff = d[:, None] - (x[None, :] - xa[sl, None])  # E - x_k
            diff[np.arange(sl.size), anchor[sl]] = d
            inv = w[None, :] / diff
            f = xa[sl] + d - eps0 - inv.sum(axis=1)
            fp = 1.0 + (inv / diff).sum(axis=1)
            # round-off bound of the evaluation of f
            noise = 8 * _EPS * (np.abs(xa[sl] + d) + abs(eps0) + np.abs(inv).sum(axis=1))
            # bracket update from the sign of f (f increases with E)
            pos = f > 0
            hi[sl] = np.where(pos, np.minimum(hi[sl], d), hi[sl])
            lo[sl] = np.where(pos, lo[sl], np.maximum(lo[sl], d))
            # Newton on g = f * d * (d - d_other)
            has_o = other[sl] >= 0
            do = np.where(has_o, x[np.maximum(other[sl], 0)] - xa[sl], 0.0)
            p = np.where(has_o, d * (d - do), d)
            dp = np.where(has_o, 2 * d - do, 1.0)
            g = f * p
            gp = fp * p + f * dp
            with np.errstate(divide="ignore", invalid="ignore"):
                new = d - g / gp
            bad = ~np.isfinite(new) | (new <= lo[sl]) | (new >= hi[sl])
            new = np.where(bad, 0.5 * (lo[sl] + hi[sl]), new)
            step = np.abs(new - d)
            width = hi[sl] - lo[sl]
            done = ((np.abs(f) <= noise) | (step <= 4 * _EPS * np.abs(new))
                    | (width <= 4 * _EPS * np.maximum(np.abs(lo[sl]), np.abs(hi[sl]))))
            new = np.where(np.abs(f) <= noise, d, new)
            delta[sl] = new
            active[sl[done]] = False
    else:
        raise ConvergenceError(
            f"secular equation: {int(active.sum())} roots did not converge")

    E = xa + delta
    W = np.empty(n + 1)
    for start in range(0, n + 1, chunk):
        sl = slice(start, start + chunk)
        d = delta[sl]
        diff = d[:, None] - (x[None, :] - xa[sl, None])
        diff[np.arange(d.size), anchor[sl]] = d
        W[sl] = 1.0 / (1.0 + (w[None, :] / diff**2).sum(axis=1))
    order = np.argsort(E, kind="stable")
    return E[order], W[order]


def _secular(E, eps0, x, w, chunk):
    out = np.empty(E.size)
    for start in range(0, E.size, chunk):
        e = E[start:start + chunk]
        out[start:start + chunk] = e - eps0 - (w[None, :] / (e[:, None] - x[None, :])).sum(axis=1)
    return out


def default_dt(energies):
    """``min(0.01, pi / (10 max|E|))``, enough to resolve the fastest phase."""
    emax = float(np.max(np.abs(energies))) if np.size(energies) else 0.0
    return 0.01 if emax == 0 else min(0.01, math.pi / (10.0 * emax))


def _times(grid):
    return grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)


def greens_function(model, grid, fermi_level=None, solver="auto"):
    """``G(t) = -i sum_n W_n exp(-i E_n t)``.

    With ``fermi_level`` set, only levels at or above it contribute: the
    particle Green's function on top of a filled Fermi sea, i.e. the
    overlap after adding one particle to the impurity.
    """
    E, W = spectrum(model, solver)
    if fermi_level is not None:
        keep = E >= fermi_level - 1e-12 * max(1.0, abs(fermi_level))
        E, W = E[keep], W[keep]
    vals = -1j * _phase_sums(W, E, _times(grid), -1)
    meta = {"quantity": "greens", "n_bath": model.n_bath, "geometry": model.geometry}
    if isinstance(grid, TimeGrid):
        return TimeSeries(grid, vals, "G", meta)
    return vals


def population(model, grid, solver="auto"):
    """Survival probability ``|i G(t)|^2`` of the initial excitation."""
    g = greens_function(model, grid, solver=solver)
    if isinstance(g, TimeSeries):
        return TimeSeries(grid, np.abs(g.values) ** 2, "P", dict(g.meta, quantity="population"))
    return np.abs(g) ** 2


def lambda_time_discrete(bath, grid):
    """``sum_n |V_n|^2 exp(-i x_n t)``."""
    vals = _phase_sums(bath.weights, bath.energies, _times(grid), -1)
    if isinstance(grid, TimeGrid):
        return TimeSeries(grid, vals, "lambda", {"method": bath.method})
    return vals


def error_series(reference, approx):
    """Pointwise ``|reference - approx|``; both must share a grid."""
    check_same_grid(reference, approx)
    return TimeSeries(reference.grid, np.abs(reference.values - approx.values), "error")


def tmax_predict(n_bath, a, b, kind="bath"):
    """Time up to which an ``n_bath``-mode Gauss rule is exact.

    ``kind="bath"``: ``2 (2 N_b - 1) / (b - a)`` for the hybridization;
    ``kind="system"``: ``2 (2 N_b + 1) / (b - a)`` for the system dynamics.

    >>> round(tmax_predict(31, -5, 5, "system"), 1)
    12.6
    """
    n = check_scalar(n_bath, "n_bath", min_val=1, integer=True)
    a, b = check_support((a, b))
    if kind == "bath":
        return 2.0 * (2 * n - 1) / (b - a)
    if kind == "system":
        return 2.0 * (2 * n + 1) / (b - a)
    raise ConfigError(f"kind must be 'bath' or 'system', got {kind!r}", "kind")


def _first_sustained(mask, consecutive):
    """Index of the first run of ``consecutive`` True values (or len(mask))."""
    if consecutive <= 1:
        hits = np.flatnonzero(mask)
        return hits[0] if hits.size else mask.size
    run = np.convolve(mask.astype(int), np.ones(consecutive, dtype=int), "valid")
    hits = np.flatnonzero(run == consecutive)
    return hits[0] if hits.size else mask.size


def tmax_empirical(err, threshold=0.004, consecutive=3):
    """First time the error exceeds ``threshold`` for ``consecutive`` samples.

    Returns ``inf`` if that never happens on the grid.
    """
    threshold = check_scalar(threshold, "threshold", min_val=0.0, strict_min=True)
    vals = np.asarray(err.values, dtype=float)
    k = _first_sustained(vals > threshold, consecutive)
    return math.inf if k >= vals.size else float(err.times[k])


def tmax_rise(err, factor=100.0, baseline_fraction=0.1, consecutive=3):
    """First time the error exceeds ``factor`` times its early-time level.

    The baseline is the largest error over the first ``baseline_fraction`` of
    the grid.
    """
    vals = np.asarray(err.values, dtype=float)
    m = max(1, int(round(baseline_fraction * vals.size)))
    base = max(float(np.max(vals[:m])), np.finfo(float).tiny)
    k = _first_sustained(vals > factor * base, consecutive)
    return math.inf if k >= vals.size else float(err.times[k])


def _reference_once(J, eps0, grid, n_ref, quantity, fermi_level):
    a, b = J.support
    bath = interval_discretize(J, linear_partition(a, b, n_ref), method="linear")
    model = SingleParticleModel(eps0, bath)
    g = greens_function(model, grid, fermi_level=fermi_level)
    return np.abs(g.values) ** 2 if quantity == "population" else g.values


def reference_solution(J, eps0, grid, n_ref=5000, quantity="population",
                       fermi_level=None, tol=1e-6):
    """Quasi-continuum solution from a linear ``n_ref``-mode discretization.

    The result is certified by comparing with a run on about half as many
    modes (rounded to the parity of ``n_ref``, so that a mode sitting exactly
    at a symmetric Fermi level appears in both runs or in neither); the
    largest deviation is stored in ``meta["certificate"]``.

    Raises
    ------
    CertificationError
        If the two runs differ by more than ``tol`` anywhere on the grid.
    """
    n_ref = check_scalar(n_ref, "n_ref", min_val=2, integer=True)
    if quantity not in ("population", "greens"):
        raise ConfigError(f"unknown quantity {quantity!r}", "quantity")
    if J.total_weight == 0:
        vals = np.exp(-1j * eps0 * grid.times)
        vals = np.abs(vals) ** 2 if quantity == "population" else -1j * vals
        return TimeSeries(grid, vals, "reference", {"n_ref": n_ref, "certificate": 0.0})
    half = n_ref // 2
    if half % 2 != n_ref % 2:
        half += 1
    fine = _reference_once(J, eps0, grid, n_ref, quantity, fermi_level)
    coarse = _reference_once(J, eps0, grid, half, quantity, fermi_level)
    dev = float(np.max(np.abs(fine - coarse)))
    if dev > tol:
        raise CertificationError(
            f"reference with n_ref={n_ref} is not converged (deviation {dev:.2e} "
            f"from n_ref={half}); increase n_ref", deviation=dev)
    return TimeSeries(grid, fine, "reference", {"n_ref": n_ref, "certificate": dev})
