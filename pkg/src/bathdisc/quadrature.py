"""Composite Gauss-Legendre quadrature with adaptive panel bisection.

The integrand ``f`` is always vectorised: it receives a 1-d array of abscissae
and returns an array whose *last* axis matches it.  Leading axes are treated as
independent components (e.g. ``J(x)`` and ``x J(x)`` stacked), so a single
adaptive pass can produce several moments at once.
"""

import numpy as np

from .exceptions import QuadratureError

GL_ORDER = 32
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_EPS = np.finfo(float).eps


def panel_rule(edges, order=GL_ORDER):
    """Return the composite Gauss-Legendre rule on consecutive panels.

    Parameters
    ----------
    edges : array_like, shape (P + 1,)
        Increasing panel boundaries.
    order : int
        Nodes per panel.

    Returns
    -------
    nodes, weights : ndarray, shape (P * order,)
    """
    edges = np.asarray(edges, dtype=float)
    left, right = edges[:-1], edges[1:]
    return _rule(left, right, order)


def _rule(left, right, order=GL_ORDER):
    if order == GL_ORDER:
        gx, gw = _GL_X, _GL_W
    else:
        gx, gw = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = mid[:, None] + half[:, None] * gx[None, :]
    weights = half[:, None] * gw[None, :]
    return nodes.ravel(), weights.ravel()


def _panel_integrals(f, left, right):
    """Integrals of every component of ``f`` over each panel, shape (k, P)."""
    nodes, weights = _rule(left, right)
    vals = np.asarray(f(nodes))
    vals = vals.reshape(-1, left.size, GL_ORDER)
    w = weights.reshape(left.size, GL_ORDER)
    return np.einsum("kpq,pq->kp", vals, w), np.einsum("kpq,pq->kp", np.abs(vals), w)


def _merge_edges(edges, breakpoints):
    edges = np.asarray(edges, dtype=float)
    if breakpoints is None or len(breakpoints) == 0:
        return edges
    bp = np.asarray(breakpoints, dtype=float)
    bp = bp[(bp > edges[0]) & (bp < edges[-1])]
    return np.unique(np.concatenate([edges, bp]))


def adapt_panels(f, edges, tol=1e-12, *, breakpoints=None, atol=0.0,
                 max_panels=200_000):
    """Refine panels until every interval of ``edges`` is integrated to ``tol``.

    Each original interval ``[edges[i], edges[i+1]]`` owns the panels it is
    split into.  The error of a panel is estimated by comparing one 32-point
    rule with two half-panel rules.  While the summed error of an interval
    exceeds ``max(tol * |I|, atol)`` (and the round-off floor), its panels
    carrying more than their share of that budget are bisected.

    Returns
    -------
    left, right : ndarray
        Accepted panel boundaries, sorted.
    owner : ndarray of int
        Index of the original interval each panel belongs to.
    values : ndarray, shape (k, P)
        Per-panel integrals (two-half estimates) of each component.
    error : ndarray, shape (n_intervals,)
        Summed error estimates per original interval.
    """
    edges = np.asarray(edges, dtype=float)
    n_int = edges.size - 1
    fine = _merge_edges(edges, breakpoints)
    new_l, new_r = fine[:-1], fine[1:]
    new_o = np.clip(
        np.searchsorted(edges, 0.5 * (new_l + new_r), side="right") - 1, 0, n_int - 1)

    left = np.empty(0)
    right = np.empty(0)
    owner = np.empty(0, dtype=int)
    values = None
    err = np.empty(0)
    absval = np.empty(0)
    while True:
        mid = 0.5 * (new_l + new_r)
        q1, _ = _panel_integrals(f, new_l, new_r)
        qa, aa = _panel_integrals(f, new_l, mid)
        qb, ab = _panel_integrals(f, mid, new_r)
        q2 = qa + qb
        e = np.max(np.abs(q2 - q1), axis=0)
        # panels that cannot be bisected further in floating point are exact enough
        e[(mid <= new_l) | (mid >= new_r)] = 0.0
        left = np.concatenate([left, new_l])
        right = np.concatenate([right, new_r])
        owner = np.concatenate([owner, new_o])
        values = q2 if values is None else np.concatenate([values, q2], axis=1)
        err = np.concatenate([err, e])
        absval = np.concatenate([absval, np.max(aa + ab, axis=0)])

        total = np.zeros((values.shape[0], n_int), dtype=values.dtype)
        np.add.at(total.T, owner, values.T)
        scale = np.max(np.abs(total), axis=0)
        tot_err = np.bincount(owner, weights=err, minlength=n_int)
        count = np.bincount(owner, minlength=n_int)
        floor = 64 * _EPS * np.bincount(owner, weights=absval, minlength=n_int)
        budget = np.maximum(np.maximum(tol * scale, atol), floor)
        open_ = tot_err > budget
        if not np.any(open_):
            break
        share = budget[owner] / (2.0 * count[owner])
        split = open_[owner] & (err > share)
        if left.size + int(split.sum()) > max_panels:
            worst = np.max(tot_err / np.maximum(scale, 1e-300))
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_panels} panels", achieved=worst)
        keep = ~split
        sl, sr, so = left[split], right[split], owner[split]
        sm = 0.5 * (sl + sr)
        left, right, owner = left[keep], right[keep], owner[keep]
        values, err, absval = values[:, keep], err[keep], absval[keep]
        new_l = np.concatenate([sl, sm])
        new_r = np.concatenate([sm, sr])
        new_o = np.concatenate([so, so])

    order = np.argsort(left, kind="stable")
    error = np.bincount(owner, weights=err, minlength=n_int)
    return left[order], right[order], owner[order], values[:, order], error


def integrate_intervals(f, edges, tol=1e-12, *, breakpoints=None, atol=0.0,
                        max_panels=200_000):
    """Integrate ``f`` over each interval defined by ``edges``.

    Returns an array of shape ``(k, n_intervals)`` (``k`` components) and the
    per-interval error estimates.
    """
    left, right, owner, values, error = adapt_panels(
        f, edges, tol, breakpoints=breakpoints, atol=atol, max_panels=max_panels)
    n_int = len(edges) - 1
    out = np.zeros((values.shape[0], n_int), dtype=values.dtype)
    np.add.at(out.T, owner, values.T)
    return out, error


def integrate(f, a, b, tol=1e-12, *, breakpoints=None, atol=0.0,
              max_panels=200_000):
    """Adaptive integral of a scalar-valued vectorised ``f`` over ``[a, b]``.

    Examples
    --------
    >>> round(integrate(np.exp, 0.0, 1.0), 12)
    1.718281828459
    """
    out, _ = integrate_intervals(
        lambda x: np.asarray(f(x))[None, :], [a, b], tol,
        breakpoints=breakpoints, atol=atol, max_panels=max_panels)
    return out[0, 0]


def adapted_rule(f, a, b, tol=1e-12, *, breakpoints=None, max_panels=200_000,
                 max_width=None):
    """Composite rule whose panels resolve ``f`` on ``[a, b]``.

    Panels wider than ``max_width`` are further split uniformly, which is how
    oscillatory factors like ``exp(-i x t)`` are accommodated.
    """
    left, right, _, _, _ = adapt_panels(
        f, [a, b], tol, breakpoints=breakpoints, max_panels=max_panels)
    if max_width is not None and max_width > 0:
        k = np.maximum(1, np.ceil((right - left) / max_width).astype(int))
        if np.any(k > 1):
            edges = [np.linspace(l, r, m + 1)[:-1] for l, r, m in zip(left, right, k)]
            left = np.concatenate(edges)
            right = np.append(left[1:], right[-1])
    return _rule(left, right)


def cumulative_integral(values, dx, method="trapezoid"):
    """Running integral of uniformly sampled ``values`` starting from zero.

    ``method="trapezoid"`` is second order.  ``method="cubic"`` integrates the
    local cubic Lagrange interpolant over each sub-interval, which is fourth
    order; it needs at least four samples.
    """
    y = np.asarray(values)
    out = np.zeros_like(y, dtype=np.result_type(y, float))
    if y.shape[0] < 2:
        return out
    if method == "trapezoid" or y.shape[0] < 4:
        inc = 0.5 * dx * (y[1:] + y[:-1])
    elif method == "cubic":
        inc = np.empty_like(out[1:])
        # interior intervals: centred 4-point stencil (y[i-1], y[i], y[i+1], y[i+2])
        inc[1:-1] = dx / 24.0 * (-y[:-3] + 13 * y[1:-2] + 13 * y[2:-1] - y[3:])
        inc[0] = dx / 24.0 * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3])
        inc[-1] = dx / 24.0 * (9 * y[-1] + 19 * y[-2] - 5 * y[-3] + y[-4])
    else:
        raise ValueError(f"unknown method {method!r}")
    out[1:] = np.cumsum(inc, axis=0)
    return out
