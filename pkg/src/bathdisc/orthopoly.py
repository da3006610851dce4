"""Orthogonal polynomials of a bath density and the resulting Gauss rules.

The recurrence coefficients of the monic polynomials orthogonal with respect
to a weight ``w`` are produced by the (discretized) Stieltjes procedure; the
Jacobi matrix built from them is diagonalized to obtain Gauss nodes and
Christoffel weights.  With ``w = J`` this gives the BSDO discretization, with
``w = 1`` the Legendre one.

Long recurrences are computed with 256-bit floats (``gmpy2.mpfr``).  Such values
are kept in :attr:`RecurrenceCoefficients.hp` and consumed by
:func:`golub_welsch` so that nothing is rounded to double before the end.
"""

import logging
import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._validation import check_scalar, check_support
from .direct import DiscreteBath
from .exceptions import (ConfigError, ConvergenceError, EmptyBathError,
                         InstabilityError, QuadratureError)
from .quadrature import GL_ORDER, adapt_panels, panel_rule
from .spectral import SpectralDensity

__all__ = [
    "RecurrenceCoefficients", "QuadratureRule", "ChainCoefficients",
    "stieltjes_recurrence", "golub_welsch", "tridiagonal_first_row",
    "bsdo_discretize", "legendre_discretize", "chain_from_weight",
    "resolve_precision", "EXTENDED_BITS", "EXTENDED_THRESHOLD",
]

log = logging.getLogger(__name__)

EXTENDED_BITS = 256
EXTENDED_THRESHOLD = 40
COEFF_TOL = 1e-10


def resolve_precision(precision, n, threshold=EXTENDED_THRESHOLD):
    """Arithmetic actually used for a recurrence of length ``n``.

    Recurrences longer than ``threshold`` always run in extended precision,
    whatever was requested.
    """
    if precision not in ("auto", "double", "extended"):
        raise ConfigError(f"unknown precision {precision!r}", "precision")
    if n > threshold:
        if precision == "double":
            log.info("n=%d exceeds %d: switching to extended precision", n, threshold)
        return "extended"
    return "extended" if precision == "extended" else "double"


@dataclass(frozen=True, eq=False)
class RecurrenceCoefficients:
    """Monic three-term recurrence ``p_{n+1} = (x - alpha_n) p_n - beta_n p_{n-1}``.

    ``betas[k]`` holds ``beta_{k+1}``; ``norm`` is the mass of the weight.
    """

    alphas: np.ndarray
    betas: np.ndarray
    norm: float
    support: tuple
    weight_tag: str = "bsdo"
    precision: str = "double"
    hp: tuple = None  # (alphas, betas, norm) as mpfr numbers, extended only

    def __post_init__(self):
        al = np.asarray(self.alphas, dtype=float)
        be = np.asarray(self.betas, dtype=float)
        if be.size != max(al.size - 1, 0):
            raise ConfigError("need len(betas) == len(alphas) - 1", "betas")
        if np.any(be <= 0):
            raise InstabilityError("non-positive beta", int(np.argmax(be <= 0)) + 1)
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "betas", be)

    @property
    def n(self):
        return self.alphas.size

    def jacobi_matrix(self):
        """Dense symmetric Jacobi matrix (diagonal alpha, off-diagonal sqrt(beta))."""
        s = np.sqrt(self.betas)
        return np.diag(self.alphas) + np.diag(s, 1) + np.diag(s, -1)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss nodes with Christoffel weights summing to ``norm``."""

    nodes: np.ndarray
    weights: np.ndarray
    norm: float

    def integrate(self, f):
        return float(np.sum(self.weights * f(self.nodes)))


@dataclass(frozen=True, eq=False)
class ChainCoefficients:
    """Semi-infinite chain truncated after ``len(alphas)`` sites.

    ``v_tot`` couples the system to site 0, site ``n`` has energy
    ``alphas[n]`` and sites ``n-1, n`` are joined by ``sqrt(betas[n-1])``.
    """

    v_tot: float
    alphas: np.ndarray
    betas: np.ndarray
    meta: dict = None

    def __post_init__(self):
        al = np.asarray(self.alphas, dtype=float).ravel()
        be = np.asarray(self.betas, dtype=float).ravel()
        if al.size == 0:
            raise EmptyBathError("a chain needs at least one site")
        if be.size != al.size - 1:
            raise ConfigError("need len(betas) == len(alphas) - 1", "betas")
        if not np.all(np.isfinite(al)) or not np.all(np.isfinite(be)):
            raise ConfigError("chain coefficients must be finite")
        if np.any(be <= 0):
            raise ConfigError("betas must be positive", "betas")
        if not self.v_tot > 0:
            raise ConfigError("v_tot must be positive", "v_tot")
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "betas", be)
        object.__setattr__(self, "v_tot", float(self.v_tot))
        object.__setattr__(self, "meta", dict(self.meta or {}))

    @property
    def n_sites(self):
        return self.alphas.size

    @property
    def hoppings(self):
        return np.sqrt(self.betas)

    def matrix(self):
        """Bath-only tridiagonal matrix."""
        h = self.hoppings
        return np.diag(self.alphas) + np.diag(h, 1) + np.diag(h, -1)

    def __len__(self):
        return self.n_sites


# -- arithmetic back ends -----------------------------------------------------

class _Double:
    name = "double"
    eps = np.finfo(float).eps
    sqrt = staticmethod(math.sqrt)
    hypot = staticmethod(math.hypot)

    @staticmethod
    def array(values):
        return np.asarray(values, dtype=float)

    @staticmethod
    def to_float(values):
        return np.asarray(values, dtype=float)

    @staticmethod
    def isfinite(v):
        return math.isfinite(v)


class _Extended:
    name = "extended"
    eps = 2.0 ** (-EXTENDED_BITS + 4)
    sqrt = staticmethod(gmpy2.sqrt)
    hypot = staticmethod(gmpy2.hypot)

    @staticmethod
    def array(values):
        values = np.asarray(values)
        out = np.empty(values.shape, dtype=object)
        out.ravel()[:] = [v if isinstance(v, type(_ONE)) else gmpy2.mpfr(float(v))
                          for v in values.ravel()]
        return out

    @staticmethod
    def to_float(values):
        return np.array([float(v) for v in np.ravel(values)], dtype=float)

    @staticmethod
    def isfinite(v):
        return gmpy2.is_finite(v)


_ONE = gmpy2.mpfr(1)


def _extended_context():
    return gmpy2.context(gmpy2.get_context(), precision=EXTENDED_BITS)


def _backend(precision):
    return _Extended if precision == "extended" else _Double


# -- Stieltjes ----------------------------------------------------------------

def _stieltjes(x, w, n, be):
    """Stieltjes procedure on the discrete measure ``sum_k w_k delta(x - x_k)``.

    Works with normalized polynomials to avoid overflow; returns lists of
    alphas and betas in the arithmetic of ``be``.
    """
    norm = np.sum(w)
    if not norm > 0:
        raise EmptyBathError("weight has no mass")
    q_prev = None
    q = np.full(x.shape, 1, dtype=x.dtype) / be.sqrt(norm)
    alphas, betas = [], []
    sb = None
    for k in range(n):
        wq = w * q
        a = np.sum(wq * x * q)
        alphas.append(a)
        if k == n - 1:
            break
        r = (x - a) * q
        if q_prev is not None:
            r = r - sb * q_prev
        b = np.sum(w * r * r)
        if not (be.isfinite(b) and b > 0):
            raise InstabilityError(
                f"recurrence broke down at order {k + 1} (beta={float(b):.3e}); "
                "retry with extended precision", k + 1)
        betas.append(b)
        sb = be.sqrt(b)
        q_prev, q = q, r / sb
    return alphas, betas, norm


def _measure_rule(J, n, level, tol=1e-14):
    """Composite Gauss rule for the measure ``J(x) dx``.

    Panels adapted to ``J`` itself are merged with ``ceil(4 n / 32) * 2**level``
    uniform panels, so polynomials of growing degree stay resolved.
    """
    a, b = J.support
    left, right, _, _, _ = adapt_panels(lambda x: J(x)[None], [a, b], tol,
                                        breakpoints=J.breakpoints)
    k = max(1, math.ceil(4 * n / GL_ORDER)) * 2**level
    edges = np.unique(np.concatenate([left, [right[-1]], np.linspace(a, b, k + 1)]))
    nodes, weights = panel_rule(edges)
    w = weights * J(nodes)
    keep = w > 0
    return nodes[keep], w[keep]


def _unit_recurrence(support, n, be):
    """Shifted Legendre coefficients in closed form."""
    a, b = support
    if be is _Extended:
        a, b = gmpy2.mpfr(a), gmpy2.mpfr(b)
    half = (b - a) / 2
    mid = (a + b) / 2
    alphas = [mid] * n
    betas = [half * half * (k * k) / (4 * k * k - 1) for k in range(1, n)]
    return alphas, betas, b - a


def _coeff_change(a1, b1, a2, b2, scale):
    da = max((abs(float(u - v)) for u, v in zip(a1, a2)), default=0.0)
    db = max((abs(float(u - v)) for u, v in zip(b1, b2)), default=0.0)
    return max(da / scale, db / scale**2)


def stieltjes_recurrence(w, n, precision="auto", *, support=None, tol=COEFF_TOL,
                         threshold=EXTENDED_THRESHOLD, max_level=10):
    """Recurrence coefficients of the polynomials orthogonal w.r.t. ``w``.

    Parameters
    ----------
    w : SpectralDensity or "unit"
        The weight.  ``"unit"`` (with ``support``) selects ``w = 1``, whose
        coefficients are known in closed form.
    n : int
        Number of alphas to produce.
    precision : {"auto", "double", "extended"}
        Requested arithmetic; see :func:`resolve_precision`.
    tol : float
        Target accuracy of the coefficients (relative to ``b - a``).  The
        discretized inner products are refined until successive coefficient
        sets differ by less than ``1e-3 * tol``.

    Raises
    ------
    InstabilityError
        If some ``beta_n`` comes out non-positive or non-finite.
    QuadratureError
        If the inner products do not settle.
    """
    n = check_scalar(n, "n", min_val=1, integer=True)
    prec = resolve_precision(precision, n, threshold)
    be = _backend(prec)
    unit = isinstance(w, str)
    if unit:
        if w != "unit":
            raise ConfigError(f"unknown weight {w!r}", "w")
        support = check_support(support)
        tag = "unit"
    elif isinstance(w, SpectralDensity):
        support = w.support
        tag = "bsdo"
    else:
        raise ConfigError("w must be a SpectralDensity or 'unit'", "w")

    with _extended_context():
        if unit:
            alphas, betas, norm = _unit_recurrence(support, n, be)
        else:
            alphas, betas, norm = _converged_stieltjes(w, n, be, tol, max_level)
        hp = None
        if prec == "extended":
            hp = (list(alphas), list(betas), norm)
        al = be.to_float(alphas)
        bt = be.to_float(betas)
        nf = float(norm)

    a, b = support
    slack = 1e-12 * (b - a)
    if np.any(al < a - slack) or np.any(al > b + slack):
        raise InstabilityError("recurrence alpha left the support; retry with extended "
                               "precision", int(np.argmax((al < a - slack) | (al > b + slack))))
    if np.any(bt <= 0):
        k = int(np.argmax(bt <= 0)) + 1
        raise InstabilityError(f"beta_{k} underflowed; retry with extended precision", k)
    return RecurrenceCoefficients(al, bt, nf, tuple(support), tag, prec, hp)


def _converged_stieltjes(J, n, be, tol, max_level):
    a, b = J.support
    scale = b - a
    target = 1e-3 * tol
    if be is _Extended:
        # locate the resolution cheaply in double, then confirm in extended
        level = _settle_level(J, n, _Double, max(target, 1e-13), scale, max_level)
        prev = None
        for lev in (level, level + 1):
            x, w = _measure_rule(J, n, lev)
            cur = _stieltjes(be.array(x), be.array(w), n, be)
            if prev is not None:
                change = _coeff_change(prev[0], prev[1], cur[0], cur[1], scale)
                if change > target:
                    log.debug("extended refinement change %.3e", change)
                    return _refine_loop(J, n, be, target, scale, lev + 1, max_level, cur)
            prev = cur
        return prev
    return _refine_loop(J, n, be, target, scale, 0, max_level, None)


def _refine_loop(J, n, be, target, scale, level, max_level, prev):
    change = math.inf
    while level <= max_level:
        x, w = _measure_rule(J, n, level)
        cur = _stieltjes(be.array(x), be.array(w), n, be)
        if prev is not None:
            change = _coeff_change(prev[0], prev[1], cur[0], cur[1], scale)
            if change <= target:
                return cur
        prev = cur
        level += 1
    raise QuadratureError(
        f"Stieltjes inner products did not settle for n={n}", achieved=change)


def _settle_level(J, n, be, target, scale, max_level):
    prev = None
    for level in range(max_level + 1):
        x, w = _measure_rule(J, n, level)
        try:
            cur = _stieltjes(x, w, n, be)
        except InstabilityError:
            return level
        if prev is not None and _coeff_change(prev[0], prev[1], cur[0], cur[1],
                                              scale) <= target:
            return max(level - 1, 0)
        prev = cur
    return max_level


# -- Golub-Welsch -------------------------------------------------------------

def _ql_first_row(d, e, be, max_iter=60):
    """Eigenvalues and first eigenvector components of a symmetric tridiagonal.

    Implicit-shift QL; only the first row of the eigenvector matrix is
    accumulated, so the cost is ``O(n^2)``.
    """
    n = len(d)
    d = list(d)
    e = list(e) + [0 * d[0]]
    z = [0 * d[0] for _ in range(n)]
    z[0] = 1 + 0 * d[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= be.eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise ConvergenceError(f"tridiagonal QL did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2 * e[l])
            r = be.hypot(g, 1)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = c = 1 + 0 * g
            p = 0 * g
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = be.hypot(f, g)
                e[i + 1] = r
                if r == 0:
                    d[i + 1] -= p
                    e[m] = 0 * r
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0 * g
    order = sorted(range(n), key=lambda k: d[k])
    return [d[k] for k in order], [z[k] for k in order]


def tridiagonal_first_row(diag, offdiag, precision="double", solver="auto"):
    """Eigenvalues and squared first eigenvector components.

    ``solver="lapack"`` uses :func:`scipy.linalg.eigh_tridiagonal`,
    ``solver="ql"`` the first-row QL iteration (the only option in extended
    precision).  Inputs may be mpfr numbers when ``precision="extended"``.
    """
    n = len(diag)
    if solver == "auto":
        solver = "ql" if precision == "extended" else "lapack"
    if precision == "extended" and solver != "ql":
        raise ConfigError("extended precision requires the QL solver", "solver")
    if n == 1:
        return np.array([float(diag[0])]), np.ones(1)
    if solver == "lapack":
        vals, vecs = eigh_tridiagonal(np.asarray(diag, dtype=float),
                                      np.asarray(offdiag, dtype=float))
        return vals, vecs[0] ** 2
    be = _backend(precision)
    with _extended_context():
        d = list(be.array(diag))
        e = list(be.array(offdiag))
        vals, z = _ql_first_row(d, e, be)
        return be.to_float(vals), be.to_float([v * v for v in z])


def golub_welsch(rc, solver="auto"):
    """Gauss rule of the weight described by ``rc``.

    Nodes are the eigenvalues of the Jacobi matrix; the Christoffel weights
    are ``norm`` times the squared first eigenvector components.
    """
    if rc.hp is not None:
        al, bt, norm = rc.hp
        with _extended_context():
            off = [gmpy2.sqrt(v) for v in bt]
            d, z = _ql_first_row(list(al), off, _Extended)
            nodes = _Extended.to_float(d)
            weights = _Extended.to_float([norm * v * v for v in z])
    else:
        nodes, z2 = tridiagonal_first_row(rc.alphas, np.sqrt(rc.betas), "double", solver)
        weights = rc.norm * z2
    a, b = rc.support
    if np.any(np.diff(nodes) <= 0):
        raise ConvergenceError("Gauss nodes are not distinct")
    if nodes[0] <= a or nodes[-1] >= b:
        log.warning("Gauss nodes touch the support boundary")
    return QuadratureRule(nodes, weights, rc.norm)


# -- discretizations ----------------------------------------------------------

def bsdo_discretize(J, n_modes, precision="auto", threshold=EXTENDED_THRESHOLD):
    """Gauss rule of ``J`` itself: nodes become energies, Christoffel weights couplings."""
    rc = stieltjes_recurrence(J, n_modes, precision, threshold=threshold)
    rule = golub_welsch(rc)
    return DiscreteBath.from_modes(rule.nodes, rule.weights, "bsdo", J.support,
                                   precision=rc.precision)


def legendre_discretize(J, n_modes, precision="auto", threshold=EXTENDED_THRESHOLD):
    """Gauss-Legendre nodes on the support with weights ``W_n J(x_n)``."""
    rc = stieltjes_recurrence("unit", n_modes, precision, support=J.support,
                              threshold=threshold)
    rule = golub_welsch(rc)
    return DiscreteBath.from_modes(rule.nodes, rule.weights * J(rule.nodes),
                                   "legendre", J.support)


def chain_from_weight(J, n_sites, precision="auto", threshold=EXTENDED_THRESHOLD):
    """Chain coefficients straight from the recurrence of ``J``."""
    rc = stieltjes_recurrence(J, n_sites, precision, threshold=threshold)
    return ChainCoefficients(math.sqrt(rc.norm), rc.alphas, rc.betas,
                             {"method": "bsdo", "precision": rc.precision})
