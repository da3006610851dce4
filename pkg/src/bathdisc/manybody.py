"""Exact many-body dynamics of the single-impurity Anderson model.

The impurity (both spins) is coupled to a small star bath.  Fermionic modes
are ordered for the Jordan-Wigner mapping as impurity-up, impurity-down, then
the bath sites in ascending energy with spins interleaved, i.e. site ``j``
(``j = 0`` the impurity) with spin ``s`` occupies bit ``2 j + s``.  Each
sector of fixed ``(N_up, N_dn)`` is built as a sparse matrix.

Ground states come from a Lanczos iteration with full reorthogonalization and
the time evolution from short-iterate Krylov exponentials.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, eigh_tridiagonal

from ._validation import check_scalar
from .direct import DiscreteBath
from .exceptions import ConfigError, ConvergenceError, SectorError
from .timeseries import TimeSeries

__all__ = ["FockBasis", "SparseHamiltonian", "ManyBodyState", "build_siam",
           "ground_state", "greens_overlap", "MAX_BATH", "DEFAULT_BUDGET"]

log = logging.getLogger(__name__)

MAX_BATH = 12
DEFAULT_BUDGET = 250_000
DENSE_DIM = 400
GAP_TOL = 1e-10


def _spread(bits):
    """Move bit ``j`` of each integer to bit ``2 j``."""
    out = np.zeros_like(bits)
    j = 0
    b = bits.copy()
    while np.any(b):
        out |= (b & 1) << (2 * j)
        b >>= 1
        j += 1
    return out


def _patterns(n_sites, n_occ):
    if n_occ < 0 or n_occ > n_sites:
        return np.empty(0, dtype=np.int64)
    pats = [sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), n_occ)]
    return np.array(sorted(pats), dtype=np.int64)


def _popcount(x):
    x = x.copy()
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation-number basis of one ``(N_up, N_dn)`` sector.

    ``states`` holds sorted integers whose bit ``2 j + s`` is the occupation
    of site ``j`` with spin ``s`` (0 = up, 1 = down).
    """

    n_sites: int
    n_up: int
    n_dn: int
    states: np.ndarray = field(repr=False)

    @classmethod
    def sector(cls, n_sites, n_up, n_dn):
        up = _spread(_patterns(n_sites, n_up))
        dn = _spread(_patterns(n_sites, n_dn)) << 1
        states = np.sort((up[:, None] | dn[None, :]).ravel())
        return cls(n_sites, n_up, n_dn, states)

    @staticmethod
    def dimension(n_sites, n_up, n_dn):
        if not (0 <= n_up <= n_sites and 0 <= n_dn <= n_sites):
            return 0
        return math.comb(n_sites, n_up) * math.comb(n_sites, n_dn)

    @property
    def dim(self):
        return self.states.size

    def index(self, states):
        """Positions of ``states`` (which must belong to the sector)."""
        return np.searchsorted(self.states, states)


def _hop(states, i, j):
    """Apply ``c_i^dag c_j`` (``i != j``) to basis states.

    Returns the mask of states giving a nonzero result, the new states and
    the Jordan-Wigner signs.
    """
    ok = ((states >> j) & 1 == 1) & ((states >> i) & 1 == 0)
    s = states[ok]
    new = s ^ (1 << i) ^ (1 << j)
    lo, hi = min(i, j), max(i, j)
    between = (s >> (lo + 1)) & ((1 << (hi - lo - 1)) - 1)
    sign = 1 - 2 * (_popcount(between) & 1)
    return ok, new, sign


@dataclass(eq=False)
class SparseHamiltonian:
    """Star-geometry SIAM, ``U (n_up - 1/2)(n_dn - 1/2)`` on the impurity.

    Sector matrices are built on demand and cached.
    """

    U: float
    energies: np.ndarray
    couplings: np.ndarray
    epsilon0: float = 0.0
    budget: int = DEFAULT_BUDGET
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_bath(self):
        return self.energies.size

    @property
    def n_sites(self):
        return self.n_bath + 1

    def sector(self, n_up, n_dn):
        """``(FockBasis, csr_matrix)`` of a sector."""
        key = (n_up, n_dn)
        if key in self._cache:
            return self._cache[key]
        dim = FockBasis.dimension(self.n_sites, n_up, n_dn)
        if dim == 0:
            raise SectorError(f"sector {key} is empty for {self.n_sites} sites")
        if dim > self.budget:
            raise SectorError(
                f"sector {key} has dimension {dim}, above the budget {self.budget}")
        basis = FockBasis.sector(self.n_sites, n_up, n_dn)
        self._cache[key] = (basis, self._build(basis))
        return self._cache[key]

    def _build(self, basis):
        st = basis.states
        onsite = np.concatenate([[self.epsilon0], self.energies])
        diag = np.zeros(st.size)
        for j, e in enumerate(onsite):
            if e != 0.0:
                occ = ((st >> (2 * j)) & 1) + ((st >> (2 * j + 1)) & 1)
                diag += e * occ
        if self.U != 0.0:
            nu = (st & 1) - 0.5
            nd = ((st >> 1) & 1) - 0.5
            diag += self.U * nu * nd
        rows = [np.arange(st.size)]
        cols = [np.arange(st.size)]
        vals = [diag]
        for k, v in enumerate(self.couplings, start=1):
            if v == 0.0:
                continue
            for s in (0, 1):
                imp, bath = s, 2 * k + s
                for i, j in ((imp, bath), (bath, imp)):
                    ok, new, sign = _hop(st, i, j)
                    rows.append(basis.index(new))
                    cols.append(np.flatnonzero(ok))
                    vals.append(v * sign)
        H = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(st.size, st.size)).tocsr()
        H.sum_duplicates()
        return H


def build_siam(U, bath=None, epsilon0=0.0, budget=DEFAULT_BUDGET):
    """Interacting impurity coupled to ``bath`` (same for both spins).

    ``bath=None`` gives the atomic limit.  At most :data:`MAX_BATH` bath
    modes are accepted.
    """
    U = check_scalar(U, "U")
    epsilon0 = check_scalar(epsilon0, "epsilon0")
    if bath is None:
        x, v = np.empty(0), np.empty(0)
    elif isinstance(bath, DiscreteBath):
        x, v = bath.energies, bath.couplings
    else:
        raise ConfigError("bath must be a DiscreteBath or None", "bath")
    if x.size > MAX_BATH:
        raise ConfigError(f"at most {MAX_BATH} bath modes are supported, got {x.size}",
                          "n_b")
    budget = check_scalar(budget, "budget", min_val=1, integer=True)
    return SparseHamiltonian(U, np.array(x, dtype=float), np.array(v, dtype=float),
                             epsilon0, budget)


@dataclass(frozen=True, eq=False)
class ManyBodyState:
    """Ground state in sector ``(n_up, n_dn)`` with its degeneracy report."""

    energy: float
    vector: np.ndarray
    sector: tuple
    residual: float
    degenerate_sectors: tuple = ()
    in_sector_gap: float = math.inf

    @property
    def degenerate(self):
        return len(self.degenerate_sectors) > 1 or self.in_sector_gap < GAP_TOL

    def report(self):
        return {"sector": list(self.sector), "energy": self.energy,
                "residual": self.residual,
                "degenerate_sectors": [list(s) for s in self.degenerate_sectors],
                "in_sector_gap": self.in_sector_gap}


def _lanczos_lowest(H, v0, tol=1e-10, max_dim=120, max_restarts=50):
    """Lowest eigenpair by Lanczos with full reorthogonalization and restarts.

    Returns ``(energy, vector, residual, gap)`` where ``gap`` is the distance
    to the second Ritz value of the last cycle.
    """
    n = H.shape[0]
    v = v0 / np.linalg.norm(v0)
    gap = math.inf
    for _ in range(max_restarts):
        m = min(max_dim, n)
        V = np.zeros((m, n))
        alphas, betas = [], []
        V[0] = v
        k_used = m
        for k in range(m):
            w = H @ V[k]
            a = V[k] @ w
            alphas.append(a)
            w -= V[:k + 1].T @ (V[:k + 1] @ w)
            w -= V[:k + 1].T @ (V[:k + 1] @ w)
            b = np.linalg.norm(w)
            if k == m - 1 or b < 1e-14 * max(1.0, abs(a)):
                k_used = k + 1
                break
            betas.append(b)
            V[k + 1] = w / b
        T_vals, T_vecs = eigh_tridiagonal(np.array(alphas), np.array(betas[:k_used - 1]))
        y = T_vecs[:, 0]
        vec = V[:k_used].T @ y
        vec /= np.linalg.norm(vec)
        E = float(vec @ (H @ vec))
        res = float(np.linalg.norm(H @ vec - E * vec))
        gap = float(T_vals[1] - T_vals[0]) if T_vals.size > 1 else math.inf
        if res < tol:
            return E, vec, res, gap
        v = vec
    raise ConvergenceError(f"Lanczos ground state did not converge (residual {res:.2e})")


def _sector_lowest(H, tol):
    n = H.shape[0]
    if n <= DENSE_DIM:
        vals, vecs = eigh(H.toarray())
        vec = vecs[:, 0]
        res = float(np.linalg.norm(H @ vec - vals[0] * vec))
        gap = float(vals[1] - vals[0]) if n > 1 else math.inf
        return float(vals[0]), vec, res, gap
    rng = np.random.default_rng(12345)  # fixed start vector for reproducibility
    return _lanczos_lowest(H, rng.standard_normal(n), tol)


def ground_state(H, sector=None, tol=1e-10):
    """Lowest eigenstate, searched over sectors around half filling.

    If the minimum is shared (within ``1e-10``) by several sectors, the
    lexicographically smallest ``(N_up, N_dn)`` is returned and the others
    are listed in :attr:`ManyBodyState.degenerate_sectors`.
    """
    L = H.n_sites
    if sector is not None:
        candidates = [tuple(sector)]
    else:
        lo, hi = max(L // 2 - 1, 0), min((L + 1) // 2 + 1, L)
        candidates = [(u, d) for u in range(lo, hi + 1) for d in range(lo, hi + 1)]
    results = {}
    for key in candidates:
        if FockBasis.dimension(L, *key) > H.budget:
            log.info("skipping sector %s above the dimension budget", key)
            continue
        _, M = H.sector(*key)
        results[key] = _sector_lowest(M, tol)
    if not results:
        raise SectorError("no sector fits the dimension budget")
    e_min = min(r[0] for r in results.values())
    tied = sorted(k for k, r in results.items() if r[0] - e_min < GAP_TOL)
    best = tied[0]
    E, vec, res, gap = results[best]
    if res >= tol:
        raise ConvergenceError(f"ground-state residual {res:.2e} exceeds {tol:.0e}")
    if len(tied) > 1 or gap < GAP_TOL:
        log.info("degenerate ground state: sectors %s, in-sector gap %.2e; using %s",
                 tied, gap, best)
    return E, ManyBodyState(E, vec, best, res, tuple(tied), gap)


def _krylov_space(H, v, dt, tol, max_dim=30):
    """Lanczos basis of ``v`` large enough for at least one step ``dt``.

    The basis grows until the a-posteriori error estimate
    ``beta_m |[exp(-i T_m dt)]_{m-1,0}|`` is well below ``tol`` (or, at
    ``max_dim``, below ``tol``).  Returns ``(V, lam, Q, beta_m)`` with
    ``T_m = Q diag(lam) Q^T``.
    """
    n = v.size
    m_max = min(max_dim, n)
    V = np.zeros((m_max, n), dtype=complex)
    V[0] = v
    alphas, betas = [], []
    for k in range(m_max):
        w = H @ V[k]
        alphas.append(np.vdot(V[k], w).real)
        w = w - V[:k + 1].T @ (V[:k + 1].conj() @ w)
        w = w - V[:k + 1].T @ (V[:k + 1].conj() @ w)
        b = float(np.linalg.norm(w))
        lam, Q = eigh_tridiagonal(np.array(alphas), np.array(betas)) if k else \
            (np.array(alphas), np.ones((1, 1)))
        est = b * abs(Q[-1] @ (np.exp(-1j * dt * lam) * Q[0]))
        if b < 1e-14 or est < 1e-3 * tol or (k == m_max - 1 and est < tol):
            return V[:k + 1], lam, Q, (0.0 if b < 1e-14 else b)
        if k == m_max - 1:
            raise ConvergenceError(
                f"Krylov exponential needs more than {m_max} vectors for step {dt}")
        betas.append(b)
        V[k + 1] = w / b
    raise ConvergenceError("Krylov exponential did not converge")  # pragma: no cover


def _apply_impurity_up(H, state, create):
    """``d_up^dag |E0>`` (``create``) or ``d_up |E0>`` in the target sector."""
    n_up, n_dn = state.sector
    basis0, _ = H.sector(n_up, n_dn)
    occupied = (basis0.states & 1) == 1
    src = ~occupied if create else occupied
    target = (n_up + 1, n_dn) if create else (n_up - 1, n_dn)
    if not np.any(src) or np.linalg.norm(state.vector[src]) < 1e-14:
        return None, target
    basis1, _ = H.sector(*target)
    psi = np.zeros(basis1.dim, dtype=complex)
    # bit 0 is the first Jordan-Wigner mode, so no sign arises
    psi[basis1.index(basis0.states[src] ^ 1)] = state.vector[src]
    return psi, target


def _propagate_overlap(M, psi0, times, tol):
    """``<psi0| exp(-i M t) |psi0>`` on ``times`` via reused Krylov bases."""
    norm2 = float(np.vdot(psi0, psi0).real)
    out = np.empty(times.size, dtype=complex)
    out[0] = norm2
    psi = psi0
    dims = []
    drift = 0.0
    k = 0
    while k < times.size - 1:
        dt = times[k + 1] - times[k]
        nrm = np.linalg.norm(psi)
        V, lam, Q, b = _krylov_space(M, psi / nrm, dt, tol)
        dims.append(V.shape[0])
        proj = V.conj() @ psi0  # <V_i|psi0>
        coef = Q[0]
        # reuse the basis for as many grid steps as its error estimate allows
        j = 0
        y = None
        while k + j < times.size - 1:
            tau = times[k + j + 1] - times[k]
            y_try = Q @ (np.exp(-1j * tau * lam) * coef)
            if j > 0 and b * abs(y_try[-1]) >= tol:
                break
            y = y_try
            j += 1
            out[k + j] = nrm * np.vdot(proj, y)
        psi = nrm * (V.T @ y)
        drift = max(drift, abs(float(np.vdot(psi, psi).real) - norm2))
        k += j
    return out, dims, drift


def greens_overlap(H, grid, state=None, tol=1e-10, kind="particle"):
    """Impurity Green's function from exact many-body propagation.

    ``kind="particle"``: ``G(t) = -i <psi0| exp(-i (H - E0) t) |psi0>`` with
    ``psi0 = d_up^dag |E0>``, propagated unnormalized so that
    ``|G(0)| = ||psi0||^2``.

    ``kind="retarded"`` adds the hole part,
    ``G(t) = -i (<E0| d exp(-i (H - E0) t) d^dag |E0>
    + <E0| d^dag exp(i (H - E0) t) d |E0>)``, which at ``U = 0`` is the full
    single-particle ``-i sum_n W_n exp(-i E_n t)``.

    The returned series carries the sector, degeneracy report, Krylov
    dimensions and the worst norm drift in ``meta``.

    Raises
    ------
    SectorError
        If the impurity up-level is fully occupied in the ground state
        (particle part).
    """
    if kind not in ("particle", "retarded"):
        raise ConfigError(f"kind must be 'particle' or 'retarded', got {kind!r}", "kind")
    if state is None:
        _, state = ground_state(H)
    E0 = state.energy
    times = grid.times
    psi_p, sec_p = _apply_impurity_up(H, state, create=True)
    if psi_p is None:
        raise SectorError("d_up^dag annihilates the ground state (impurity up-level full)")
    _, M = H.sector(*sec_p)
    M = (M - E0 * sp.identity(M.shape[0], format="csr")).tocsr()
    out, dims, drift = _propagate_overlap(M, psi_p, times, tol)
    norm2 = float(out[0].real)
    if kind == "retarded":
        psi_h, sec_h = _apply_impurity_up(H, state, create=False)
        if psi_h is not None:
            _, Mh = H.sector(*sec_h)
            Mh = (Mh - E0 * sp.identity(Mh.shape[0], format="csr")).tocsr()
            hole, dims_h, drift_h = _propagate_overlap(Mh, psi_h, times, tol)
            out = out + np.conj(hole)
            dims += dims_h
            drift = max(drift, drift_h)
    meta = {"sector": list(state.sector), "ground_energy": E0, "psi0_norm2": norm2,
            "kind": kind, "krylov_dim_max": max(dims, default=0),
            "krylov_dim_mean": float(np.mean(dims)) if dims else 0.0,
            "norm_drift": drift, "degeneracy": state.report()}
    if drift > 1e-9:
        log.warning("Krylov propagation changed the norm by %.2e", drift)
    return TimeSeries(grid, -1j * out, "G", meta)
