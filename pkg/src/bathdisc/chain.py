"""Star <-> chain transformations of a discrete bath.

:func:`lanczos_tridiagonalize` maps a star bath onto a chain by running
Lanczos on ``diag(x_n)`` from the normalized coupling vector; the inverse
:func:`star_from_chain` diagonalizes the chain.
"""

import logging
from dataclasses import dataclass

import gmpy2
import numpy as np

from .direct import DiscreteBath
from .orthopoly import (EXTENDED_THRESHOLD, ChainCoefficients, _backend,
                        _extended_context, resolve_precision, tridiagonal_first_row)

__all__ = ["LanczosState", "lanczos_tridiagonalize", "star_from_chain"]

log = logging.getLogger(__name__)

_BREAKDOWN = {"double": 1e-14, "extended": 1e-60}


@dataclass(eq=False)
class LanczosState:
    """Krylov basis and coefficients produced by a Lanczos run.

    ``basis[k]`` is the k-th chain orbital expressed in star modes.
    ``breakdown`` is the order at which the recursion terminated early, or
    ``None``.
    """

    basis: np.ndarray
    alphas: list
    betas: list
    precision: str
    breakdown: int = None

    def max_overlap(self):
        """Largest ``|<f_i|f_j>|`` for ``i != j``."""
        with _extended_context():
            G = self.basis @ self.basis.T
        k = G.shape[0]
        off = [abs(float(G[i, j])) for i in range(k) for j in range(k) if i != j]
        return max(off, default=0.0)


def lanczos_tridiagonalize(bath, precision="auto", *, threshold=EXTENDED_THRESHOLD,
                           return_state=False):
    """Chain coefficients of a star bath.

    The start vector has components ``V_n / V_tot``.  Every new Lanczos
    vector is reorthogonalized (twice) against all previous ones.  If the
    Krylov space closes before ``n_modes`` steps, which happens for
    degenerate energies, the shorter exact chain is returned and
    ``chain.meta["breakdown"]`` records the order.
    """
    if not isinstance(bath, DiscreteBath):
        raise TypeError("bath must be a DiscreteBath")
    n = bath.n_modes
    prec = resolve_precision(precision, n, threshold)
    be = _backend(prec)
    tol = _BREAKDOWN[prec]
    with _extended_context():
        x = be.array(bath.energies)
        w = be.array(bath.weights)
        vtot = be.sqrt(np.sum(w))
        f = np.array([be.sqrt(v) for v in w], dtype=x.dtype) / vtot
        scale = max(abs(bath.energies[0]), abs(bath.energies[-1]), 1e-300)
        basis = [f]
        alphas, betas = [], []
        f_prev, sb = None, None
        breakdown = None
        for k in range(n):
            u = x * f
            a = np.dot(f, u)
            alphas.append(a)
            if k == n - 1:
                break
            r = u - a * f
            if f_prev is not None:
                r = r - sb * f_prev
            F = np.array(basis)
            for _ in range(2):
                r = r - F.T @ (F @ r)
            b = np.dot(r, r)
            if not b > (tol * scale) ** 2:
                breakdown = k + 1
                log.warning("Lanczos breakdown at order %d of %d "
                            "(degenerate bath energies?)", breakdown, n)
                break
            betas.append(b)
            sb = be.sqrt(b)
            f_prev, f = f, r / sb
            basis.append(f)
        chain = ChainCoefficients(
            float(vtot), be.to_float(alphas), be.to_float(betas),
            {"method": bath.method, "precision": prec, "breakdown": breakdown})
        if return_state:
            return chain, LanczosState(np.array(basis), alphas, betas, prec, breakdown)
        return chain


def star_from_chain(chain, precision="double"):
    """Diagonalize a chain back into a star bath.

    Energies are the eigenvalues of the bath tridiagonal, weights
    ``v_tot**2`` times the squared first eigenvector components.
    """
    if not isinstance(chain, ChainCoefficients):
        raise TypeError("chain must be ChainCoefficients")
    if precision == "extended":
        with _extended_context():
            off = [gmpy2.sqrt(gmpy2.mpfr(float(b))) for b in chain.betas]
            energies, z2 = tridiagonal_first_row(chain.alphas, off, "extended")
    else:
        energies, z2 = tridiagonal_first_row(chain.alphas, chain.hoppings)
    weights = chain.v_tot**2 * z2
    support = chain.meta.get("support")
    if support is not None:
        support = (min(support[0], energies[0]), max(support[1], energies[-1]))
    return DiscreteBath.from_modes(energies, weights, "chain", support)
