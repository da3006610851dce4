"""Direct (interval based) bath discretizations.

Every routine maps a continuous :class:`~bathdisc.spectral.SpectralDensity`
onto a :class:`DiscreteBath`, i.e. a finite set of bath energies ``x_n`` with
coupling weights ``|V_n|^2``:

* :func:`trapezoid_discretize` samples ``J`` at equally spaced midpoints,
* :func:`interval_discretize` averages ``J`` over arbitrary intervals (with
  :func:`linear_partition` or :func:`log_partition`),
* :func:`mean_method` places energies at recursive spectral means,
* :func:`equal_weight_method` uses quantiles of ``J`` so that every mode
  carries the same weight.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_increasing, check_scalar, check_support
from .exceptions import ConfigError, EmptyBathError, NumericalError
from .quadrature import GL_ORDER, _GL_W, _GL_X, adapt_panels
from .spectral import interval_moments

__all__ = [
    "DiscreteBath", "IntervalPartition", "DroppedModesWarning",
    "trapezoid_discretize", "interval_discretize", "linear_partition",
    "log_partition", "mean_method", "equal_weight_method",
]


class DroppedModesWarning(UserWarning):
    """Modes with zero spectral weight were removed from a discrete bath."""


@dataclass(frozen=True, eq=False)
class DiscreteBath:
    """Star representation of a discretized bath.

    Attributes
    ----------
    energies : ndarray
        Strictly increasing bath energies ``x_n``.
    weights : ndarray
        Positive couplings ``|V_n|^2``.
    method : str
        Provenance tag of the discretization.
    support : tuple
        Support ``[a, b]`` of the density the bath was built from.
    dropped : tuple
        Energies (or interval labels) of modes removed for having no weight.
    """

    energies: np.ndarray
    weights: np.ndarray
    method: str = ""
    support: tuple = None
    dropped: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.energies, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if x.size == 0:
            raise EmptyBathError("a discrete bath needs at least one mode")
        if x.shape != w.shape:
            raise ConfigError("energies and weights differ in length", "weights")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ConfigError("energies and weights must be finite")
        if np.any(np.diff(x) <= 0):
            raise ConfigError("energies must be strictly increasing", "energies")
        if np.any(w <= 0):
            raise ConfigError("weights must be positive", "weights")
        support = self.support
        if support is None:
            support = (float(x[0]), float(x[-1]))
        else:
            support = tuple(float(v) for v in support)
            a, b = support
            span = b - a
            if x[0] < a - 1e-12 * span or x[-1] > b + 1e-12 * span:
                raise ConfigError("energies must lie inside the support", "energies")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "energies", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    @classmethod
    def from_modes(cls, energies, weights, method="", support=None, **meta):
        """Build a bath, dropping (and reporting) modes of zero weight."""
        x = np.asarray(energies, dtype=float)
        w = np.asarray(weights, dtype=float)
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        keep = w > 0
        dropped = tuple(float(v) for v in x[~keep])
        if not np.any(keep):
            raise EmptyBathError(
                f"{method or 'discretization'}: every mode has zero weight")
        if dropped:
            warnings.warn(
                f"{method}: dropped {len(dropped)} zero-weight mode(s)",
                DroppedModesWarning, stacklevel=3)
        return cls(x[keep], w[keep], method, support, dropped, dict(meta))

    @property
    def n_modes(self):
        return self.energies.size

    @property
    def couplings(self):
        """Real positive couplings ``V_n = sqrt(|V_n|^2)``."""
        return np.sqrt(self.weights)

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    def hybridization(self, z):
        """Discrete hybridization ``sum_n |V_n|^2 / (z - x_n)``."""
        z = np.asarray(z, dtype=complex)
        return np.sum(self.weights / (z[..., None] - self.energies), axis=-1)

    def __len__(self):
        return self.n_modes

    def __repr__(self):
        return (f"DiscreteBath(method={self.method!r}, n_modes={self.n_modes}, "
                f"support={self.support})")


@dataclass(frozen=True, eq=False)
class IntervalPartition:
    """Breakpoints ``a = b_0 < b_1 < ... < b_N = b`` of disjoint intervals."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = check_increasing(self.breakpoints, "breakpoints", min_size=2)
        bp.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n_intervals(self):
        return self.breakpoints.size - 1

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    @property
    def support(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])


def _check_n(n_modes):
    return check_scalar(n_modes, "n_modes", min_val=1, integer=True)


def trapezoid_discretize(J, n_modes):
    """Sample ``J`` at the midpoints of ``n_modes`` equal intervals.

    ``|V_n|^2 = J(x_n) * dx``.  First-order accurate: the total weight is not
    conserved exactly.
    """
    n = _check_n(n_modes)
    a, b = J.support
    dx = (b - a) / n
    x = a + dx * (np.arange(n) + 0.5)
    return DiscreteBath.from_modes(x, J(x) * dx, "trapezoid", J.support)


def linear_partition(a, b, n_modes):
    """``n_modes`` intervals of equal width on ``[a, b]``."""
    a, b = check_support((a, b))
    n = _check_n(n_modes)
    bp = np.linspace(a, b, n + 1)
    return IntervalPartition(bp)


def _geometric_side(length, n, lam):
    """Widths ``w, w/lam, ..., w/lam^(n-1)`` summing to ``length``."""
    ratios = lam ** -np.arange(n, dtype=float)
    return length * ratios / ratios.sum()


def log_partition(a, b, n_modes, lam=2.0, x_accum=0.0):
    """Logarithmic grid whose interval widths shrink by ``lam`` toward ``x_accum``.

    The intervals are shared between ``[a, x_accum]`` and ``[x_accum, b]`` in
    proportion to their lengths (each non-empty side receives at least one
    interval when ``n_modes >= 2``).
    """
    a, b = check_support((a, b))
    n = _check_n(n_modes)
    lam = check_scalar(lam, "lam", min_val=1.0, strict_min=True)
    x_accum = check_scalar(x_accum, "x_accum", min_val=a, max_val=b)
    left_len, right_len = x_accum - a, b - x_accum
    n_left = int(round(n * left_len / (b - a)))
    if left_len > 0 and right_len > 0 and n >= 2:
        n_left = min(max(n_left, 1), n - 1)
    elif right_len == 0:
        n_left = n
    elif left_len == 0:
        n_left = 0
    n_right = n - n_left
    pieces = [a]
    if n_left:
        widths = _geometric_side(left_len, n_left, lam)  # outermost first
        pieces.extend(a + np.cumsum(widths)[:-1])
        pieces.append(x_accum)
    if n_right:
        widths = _geometric_side(right_len, n_right, lam)[::-1]  # innermost first
        pieces.extend(x_accum + np.cumsum(widths)[:-1])
    pieces.append(b)
    bp = np.array(pieces, dtype=float)
    bp = bp[np.concatenate([[True], np.diff(bp) > 0])]
    return IntervalPartition(bp)


def interval_discretize(J, partition, method="interval"):
    """Average ``J`` over each interval of ``partition``.

    ``|V_n|^2 = int_{I_n} J`` and ``x_n`` is the ``J``-weighted mean of ``I_n``.
    Intervals without weight are dropped and reported.
    """
    if not isinstance(partition, IntervalPartition):
        partition = IntervalPartition(partition)
    edges = partition.breakpoints
    w, m1, _ = interval_moments(J, edges)
    pos = w > 0
    x = np.where(pos, m1 / np.where(pos, w, 1.0), 0.5 * (edges[:-1] + edges[1:]))
    x = np.clip(x, edges[:-1], edges[1:])
    return DiscreteBath.from_modes(x, np.where(pos, w, 0.0), method, J.support)


def mean_method(J, n_modes):
    """Recursive spectral means.

    The first energy is the mean of ``J`` over its support; each placed
    energy splits its interval in two, and the children are processed
    breadth first (left to right within a generation) until ``n_modes``
    energies exist.  Weights integrate ``J`` over cells bounded by midpoints
    between neighbouring energies, the outer cells extending to the support
    edges.

    Raises
    ------
    NumericalError
        If weightless sub-intervals prevent reaching ``n_modes`` energies.
    """
    n = _check_n(n_modes)
    a, b = J.support
    generation = [(a, b)]
    energies = []
    while generation and len(energies) < n:
        edges_l = np.array([g[0] for g in generation])
        edges_r = np.array([g[1] for g in generation])
        w, m1 = _moments_on(J, edges_l, edges_r)
        children = []
        for (l, r), wi, mi in zip(generation, w, m1):
            if len(energies) >= n:
                break
            if not wi > 0:
                continue
            xm = min(max(mi / wi, l), r)
            if not l < xm < r:
                continue
            energies.append(xm)
            children.extend([(l, xm), (xm, r)])
        generation = children
    if len(energies) < n:
        raise NumericalError(
            f"mean method can only place {len(energies)} energies for this density "
            f"(requested {n})")
    x = np.sort(np.array(energies))
    cells = np.concatenate([[a], 0.5 * (x[1:] + x[:-1]), [b]])
    w, _, _ = interval_moments(J, cells)
    return DiscreteBath.from_modes(x, w, "mean:bfs", J.support)


def _moments_on(J, left, right):
    """Zeroth/first moments on possibly non-contiguous intervals."""
    edges = np.unique(np.concatenate([left, right]))
    w, m1, _ = interval_moments(J, edges)
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cm = np.concatenate([[0.0], np.cumsum(m1)])
    il = np.searchsorted(edges, left)
    ir = np.searchsorted(edges, right)
    return cw[ir] - cw[il], cm[ir] - cm[il]


def _cdf_quantiles(J, levels, tol=1e-13):
    """Smallest ``x`` with ``int_a^x J >= level`` for each level."""
    a, b = J.support
    left, right, _, values, _ = adapt_panels(
        lambda x: J(x)[None], [a, b], tol, breakpoints=J.breakpoints)
    cum = np.concatenate([[0.0], np.cumsum(values[0])])
    edges = np.append(left, right[-1])
    idx = np.searchsorted(cum, levels, side="left")
    idx = np.clip(idx, 1, edges.size - 1)
    p_left, p_right = edges[idx - 1], edges[idx]
    base = cum[idx - 1]
    lo, hi = p_left.copy(), p_right.copy()

    def partial(x_hi):
        half = 0.5 * (x_hi - p_left)
        nodes = (p_left + half)[:, None] + half[:, None] * _GL_X[None, :]
        return base + (J(nodes.ravel()).reshape(-1, GL_ORDER) @ _GL_W) * half

    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = partial(mid) >= levels
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= 1e-15 * (abs(a) + abs(b))):
            break
    return hi


def equal_weight_method(J, n_modes):
    """Quantile partition: every interval carries ``|V_tot|^2 / n_modes``."""
    n = _check_n(n_modes)
    a, b = J.support
    total = J.total_weight
    if not total > 0:
        raise EmptyBathError("equal-weight method needs a density with positive weight")
    levels = total * np.arange(1, n) / n
    inner = _cdf_quantiles(J, levels) if n > 1 else np.empty(0)
    bp = np.concatenate([[a], inner, [b]])
    if np.any(np.diff(bp) <= 0):
        raise NumericalError("equal-weight breakpoints collapsed; density too concentrated")
    return interval_discretize(J, IntervalPartition(bp), method="equal_weight")
