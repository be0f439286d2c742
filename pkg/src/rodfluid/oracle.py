"""Exact finite-state references for small lattices.

Everything here is written directly from the move definitions with plain
loops, independent of the event-driven engine, so it can stand as evidence
against it.  States are bit-packed fields plus the rod row; generators are
sparse; transient laws come from uniformization with a tail bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp
from scipy.stats import poisson

from .model import FullState, LatticeGeometry, Params, density_profile


def _free_sites(geom: LatticeGeometry, N: int, rod_row: int) -> list[int]:
    sites = []
    for r in range(geom.n_rows):
        for c in range(geom.width):
            if r == rod_row and c < N:
                continue
            sites.append(r * geom.width + c)
    return sites


class StateIndex:
    """Enumeration of (field, rod row) states of a small lattice.

    Keys are field bits in row-major site order with the rod row in the top
    bits.  Optional restrictions: a fixed rod row (rod parked) or a fixed
    monomer count (the dynamics conserve it, so this picks one sector).
    """

    def __init__(self, geom: LatticeGeometry, N: int,
                 rod_rows=None, particle_count: int | None = None):
        geom.require_fits(N)
        n_sites = geom.n_rows * geom.width
        if n_sites + 4 > 64:
            raise ValueError("lattice too large for 64-bit state keys")
        self.geom = geom
        self.N = N
        self.n_sites = n_sites
        self.rod_rows = (list(range(geom.n_rows)) if rod_rows is None
                         else [int(r) for r in rod_rows])
        self.particle_count = particle_count
        keys: list[int] = []
        for rr in self.rod_rows:
            free = _free_sites(geom, N, rr)
            base = rr << n_sites
            for combo in range(1 << len(free)):
                if particle_count is not None \
                        and combo.bit_count() != particle_count:
                    continue
                bits = 0
                for j, site in enumerate(free):
                    if combo >> j & 1:
                        bits |= 1 << site
                keys.append(base | bits)
        self.keys = keys
        self.index = {k: i for i, k in enumerate(keys)}

    def __len__(self) -> int:
        return len(self.keys)

    def decode(self, i: int) -> FullState:
        key = self.keys[i]
        rr = key >> self.n_sites
        occ = np.zeros((self.geom.n_rows, self.geom.width), np.uint8)
        for site in range(self.n_sites):
            if key >> site & 1:
                occ[site // self.geom.width, site % self.geom.width] = 1
        return FullState(occ, self.geom.height_of(rr))

    def index_of(self, state: FullState) -> int:
        rr = self.geom.row_of(state.rod_y)
        bits = 0
        for site in range(self.n_sites):
            if state.occ[site // self.geom.width, site % self.geom.width]:
                bits |= 1 << site
        return self.index[(rr << self.n_sites) | bits]


def _transitions(sidx: StateIndex, params: Params, key: int,
                 include_rod: bool):
    """Yield (target_key, rate) for every move out of `key`."""
    geom = sidx.geom
    H, W, N = geom.n_rows, geom.width, sidx.N
    ns = sidx.n_sites
    rr = key >> ns
    bits = key & ((1 << ns) - 1)

    def occ(r, c):
        return bits >> (r * W + c) & 1

    # horizontal swaps, half rate per ring edge, one edge when W == 2
    for r in range(H):
        for c in range(W if W > 2 else 1):
            cn = (c + 1) % W
            if r == rr and (c < N or cn < N):
                continue
            if occ(r, c) != occ(r, cn):
                flip = (1 << (r * W + c)) | (1 << (r * W + cn))
                yield (rr << ns) | (bits ^ flip), params.gamma1 / 2.0

    # vertical monomer jumps with exclusion and rod blocking
    for r in range(H):
        for c in range(W):
            if not occ(r, c):
                continue
            if r + 1 < H and not occ(r + 1, c) \
                    and not (r + 1 == rr and c < N):
                flip = (1 << (r * W + c)) | (1 << ((r + 1) * W + c))
                yield (rr << ns) | (bits ^ flip), params.gamma2 * params.p
            if r - 1 >= 0 and not occ(r - 1, c) \
                    and not (r - 1 == rr and c < N):
                flip = (1 << (r * W + c)) | (1 << ((r - 1) * W + c))
                yield (rr << ns) | (bits ^ flip), params.gamma2 * params.q

    # rod moves succeed only into an empty stretch; failed trials are
    # invisible in continuous time
    if include_rod:
        for tr, rate in ((rr + 1, params.a), (rr - 1, params.b)):
            if 0 <= tr < H and all(not occ(tr, c) for c in range(N)):
                yield (tr << ns) | bits, rate


def build_generator(sidx: StateIndex, params: Params,
                    include_rod: bool = True) -> sp.csr_matrix:
    """Sparse generator Q (rows sum to zero) on the enumerated states."""
    rows, cols, vals = [], [], []
    diag = np.zeros(len(sidx))
    for i, key in enumerate(sidx.keys):
        for tkey, rate in _transitions(sidx, params, key, include_rod):
            j = sidx.index.get(tkey)
            if j is None:
                raise KeyError(
                    "transition leaves the enumerated state space; "
                    "check rod_rows/particle_count restrictions")
            rows.append(i)
            cols.append(j)
            vals.append(rate)
            diag[i] -= rate
    rows.extend(range(len(sidx)))
    cols.extend(range(len(sidx)))
    vals.extend(diag.tolist())
    n = len(sidx)
    return sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
        shape=(n, n))


def stationary_law(sidx: StateIndex, params: Params) -> np.ndarray:
    """Reversible weights: rod factor (a/b)^y (1-rho(y))^N times the
    product field measure on the free sites, normalized over the index."""
    geom = sidx.geom
    heights = geom.heights()
    rho = np.asarray(density_profile(params, heights), dtype=np.float64)
    log_rho = np.log(rho)
    log_vac = np.log1p(-rho)
    log_ab = np.log(params.a) - np.log(params.b)
    logw = np.empty(len(sidx))
    for i, key in enumerate(sidx.keys):
        rr = key >> sidx.n_sites
        y = heights[rr]
        w = y * log_ab + sidx.N * log_vac[rr]
        for site in range(sidx.n_sites):
            r = site // geom.width
            if rr == r and site % geom.width < sidx.N:
                continue
            w += log_rho[r] if key >> site & 1 else log_vac[r]
        logw[i] = w
    return np.exp(logw - logsumexp(logw))


def product_law(sidx: StateIndex, params: Params, rod_y: int) -> np.ndarray:
    """Initial law: rod parked at rod_y, field from the conditioned product
    measure (zero mass on other rod rows)."""
    geom = sidx.geom
    rr0 = geom.row_of(rod_y)
    rho = np.asarray(density_profile(params, geom.heights()),
                     dtype=np.float64)
    log_rho = np.log(rho)
    log_vac = np.log1p(-rho)
    logw = np.full(len(sidx), -np.inf)
    for i, key in enumerate(sidx.keys):
        if key >> sidx.n_sites != rr0:
            continue
        w = 0.0
        for site in range(sidx.n_sites):
            r = site // geom.width
            if r == rr0 and site % geom.width < sidx.N:
                continue
            w += log_rho[r] if key >> site & 1 else log_vac[r]
        logw[i] = w
    if sidx.particle_count is not None:
        return np.exp(logw - logsumexp(logw))
    law = np.exp(logw)
    law[~np.isfinite(logw)] = 0.0
    return law / law.sum()


def detailed_balance_residual(Q: sp.spmatrix, mu: np.ndarray) -> float:
    """max |mu_i q_ij - mu_j q_ji| over off-diagonal pairs."""
    C = sp.coo_matrix(Q)
    flux = {}
    for i, j, v in zip(C.row, C.col, C.data):
        if i == j:
            continue
        flux[(int(i), int(j))] = mu[i] * v
    worst = 0.0
    for (i, j), f in flux.items():
        worst = max(worst, abs(f - flux.get((j, i), 0.0)))
    return worst


def stationarity_residual(Q: sp.spmatrix, mu: np.ndarray) -> float:
    return float(np.abs(mu @ Q).max())


def transient_law(Q: sp.spmatrix, p0: np.ndarray, t: float,
                  tail: float = 1e-12) -> np.ndarray:
    """Law at time t by uniformization; the truncated Poisson tail is
    checked against `tail`."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return p0.copy()
    lam = float(-Q.diagonal().min()) * (1.0 + 1e-12) + 1e-300
    P = sp.eye(Q.shape[0], format="csr") + sp.csr_matrix(Q) / lam
    mu_t = lam * t
    K = int(mu_t + 12.0 * np.sqrt(mu_t) + 30.0)
    if poisson.sf(K, mu_t) > tail:
        raise RuntimeError("uniformization truncation too short")
    weights = poisson.pmf(np.arange(K + 1), mu_t)
    v = p0.astype(np.float64)
    out = weights[0] * v
    for k in range(1, K + 1):
        v = v @ P
        out = out + weights[k] * v
    return out


def expm_law(Q: sp.spmatrix, p0: np.ndarray, t: float) -> np.ndarray:
    """Dense matrix-exponential law, for cross-checking tiny systems."""
    from scipy.linalg import expm

    n = Q.shape[0]
    if n > 2500:
        raise ValueError("dense expm reserved for small systems")
    return p0 @ expm(np.asarray(Q.todense()) * t)


def rod_marginal(sidx: StateIndex, law: np.ndarray) -> np.ndarray:
    """Sum the state law over fields; entry r is the mass on rod row r."""
    out = np.zeros(sidx.geom.n_rows)
    for i, key in enumerate(sidx.keys):
        out[key >> sidx.n_sites] += law[i]
    return out


def birth_death_generator(up: np.ndarray, down: np.ndarray) -> sp.csr_matrix:
    """Tridiagonal generator of a nearest-neighbour walk on a closed
    window; up[-1] and down[0] are ignored."""
    n = len(up)
    if len(down) != n:
        raise ValueError("up and down must have equal length")
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for i in range(n):
        if i + 1 < n and up[i] > 0:
            rows.append(i)
            cols.append(i + 1)
            vals.append(float(up[i]))
            diag[i] -= up[i]
        if i - 1 >= 0 and down[i] > 0:
            rows.append(i)
            cols.append(i - 1)
            vals.append(float(down[i]))
            diag[i] -= down[i]
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag.tolist())
    return sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
        shape=(n, n))


@dataclass
class OracleReport:
    """Summary of the exact checks on one small system."""

    n_states: int
    db_residual: float
    stationarity: float
    rates_nonneg: bool

    @property
    def ok(self) -> bool:
        return self.db_residual < 1e-12 and self.stationarity < 1e-10 \
            and self.rates_nonneg


def run_oracle_check(params: Params, geom: LatticeGeometry,
                     particle_count: int | None = None) -> OracleReport:
    """Build the joint chain on a small lattice and test reversibility of
    the closed-form stationary law."""
    sidx = StateIndex(geom, params.N, particle_count=particle_count)
    Q = build_generator(sidx, params)
    mu = stationary_law(sidx, params)
    off = Q - sp.diags(Q.diagonal())
    return OracleReport(
        n_states=len(sidx),
        db_residual=detailed_balance_residual(Q, mu),
        stationarity=stationarity_residual(Q, mu),
        rates_nonneg=bool((off.data >= 0).all()),
    )
