"""Two copies of the fluid driven by shared clocks, rod parked.

Both copies see the same exponential clock and the same site choices; a
move applies in whichever copy it is legal.  Sites where the copies differ
(discrepancies) can wander under swaps, hop vertically, or annihilate in
pairs; they are never created, and the pair ordering eta >= zeta survives
the dynamics.  A single discrepancy can carry a tag whose position and
unwrapped horizontal displacement are tracked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .kinetics import rates_vector
from .model import FullState, LatticeGeometry, Params, density_profile
from .rng import RngStream, derive_master


def _coupled_rates(params: Params) -> np.ndarray:
    r = rates_vector(params)
    r[3] = 0.0
    r[4] = 0.0
    return r


class CoupledState:
    """Mutable pair (eta, zeta) with the shared rate index and tag."""

    def __init__(self, eta: FullState, zeta: FullState,
                 geom: LatticeGeometry, N: int):
        if eta.rod_y != zeta.rod_y:
            raise ValueError("copies must share the rod position")
        geom.require_fits(N)
        self.geom = geom
        self.N = N
        self.o1 = eta.occ.copy()
        self.o2 = zeta.occ.copy()
        rod_row = geom.row_of(eta.rod_y)
        hcnt, ucnt, dcnt, scal = _k._init_counts2(self.o1, self.o2, rod_row,
                                                  N)
        self.hcnt = hcnt
        self.ucnt = ucnt
        self.dcnt = dcnt
        self.scal = scal
        self.tag = np.zeros(5, np.int64)
        self.dstat = np.zeros(2, np.int64)
        self.dstat[0] = _k._count_discrepancies(self.o1, self.o2)

    @property
    def rod_row(self) -> int:
        return int(self.scal[0])

    @property
    def discrepancies(self) -> int:
        return int(self.dstat[0])

    @property
    def violations(self) -> int:
        return int(self.dstat[1])

    @property
    def tag_alive(self) -> bool:
        return bool(self.tag[0])

    @property
    def tag_site(self) -> tuple[int, int]:
        return int(self.tag[1]), int(self.tag[2])

    @property
    def tag_dx(self) -> int:
        return int(self.tag[4])

    def set_tag(self, y: int, col: int) -> None:
        """Attach the tag to an existing discrepancy at (height, col)."""
        r = self.geom.row_of(y)
        sign = int(self.o1[r, col]) - int(self.o2[r, col])
        if sign == 0:
            raise ValueError(f"no discrepancy at height {y}, column {col}")
        self.tag[:] = (1, r, col, sign, 0)

    def verify(self) -> None:
        """Recount the shared index and the discrepancy total."""
        hcnt, ucnt, dcnt, scal = _k._init_counts2(self.o1, self.o2,
                                                  self.rod_row, self.N)
        ok = (np.array_equal(hcnt, self.hcnt)
              and np.array_equal(ucnt, self.ucnt)
              and np.array_equal(dcnt, self.dcnt)
              and np.array_equal(scal, self.scal)
              and self.dstat[0] == _k._count_discrepancies(self.o1, self.o2))
        if not ok:
            raise AssertionError("coupled rate index out of sync")

    def ordered(self) -> bool:
        """True when eta dominates zeta sitewise."""
        return bool((self.o1 >= self.o2).all())


def coupled_step(cs: CoupledState, params: Params,
                 rng: RngStream) -> tuple[int, float, int, int]:
    """One shared event; returns (kind, dt, row, col)."""
    kind, dt, r, c = _k._step2_event(
        cs.o1, cs.o2, cs.hcnt, cs.ucnt, cs.dcnt, cs.scal,
        _coupled_rates(params), cs.N, rng.state, cs.tag, cs.dstat)
    return int(kind), float(dt), int(r), int(c)


@dataclass
class CoupledEnsemble:
    """Per-replica checkpoint data from coupled runs."""

    check_times: np.ndarray
    tag_row: int
    tag_col: int
    alive: np.ndarray      # (n_check, n_replicas) 0/1
    rows: np.ndarray       # tag row, valid where alive
    cols: np.ndarray
    dx: np.ndarray         # unwrapped horizontal displacement
    discrepancies: np.ndarray
    violations: np.ndarray  # per replica, whole run
    n_replicas: int
    eta_row_mean: np.ndarray | None = None
    zeta_row_mean: np.ndarray | None = None

    def at_start_prob(self, k: int = -1) -> float:
        """Fraction of replicas whose tag sits at its starting site."""
        hit = (self.alive[k] == 1) & (self.rows[k] == self.tag_row) \
            & (self.cols[k] == self.tag_col)
        return float(hit.mean())

    def alive_prob(self, k: int = -1) -> float:
        return float((self.alive[k] == 1).mean())


def _run_coupled_ensemble(params: Params, geom: LatticeGeometry,
                          master_seed: int, n_replicas: int, t_end: float,
                          check_times, mode: int, tag_y: int, tag_col: int,
                          rod_y: int, accumulate_rows: bool
                          ) -> CoupledEnsemble:
    geom.require_fits(params.N)
    ct = np.asarray(check_times, np.float64)
    if ct.size == 0 or np.any(np.diff(ct) <= 0) or ct[0] <= 0:
        raise ValueError("check_times must be nonempty, increasing, > 0")
    rod_row = geom.row_of(rod_y)
    tag_row = geom.row_of(tag_y) if mode == 0 else 0
    if mode == 0 and tag_row == rod_row and tag_col < params.N:
        raise ValueError("tag site lies inside the rod region")
    probs = density_profile(params, geom.heights()).astype(np.float64)
    nc = ct.size
    rep_tag = np.empty((nc, n_replicas, 4), np.int64)
    rep_disc = np.empty((nc, n_replicas), np.int64)
    rep_viol = np.empty(n_replicas, np.int64)
    eta_rows = np.zeros(geom.n_rows, np.int64)
    zeta_rows = np.zeros(geom.n_rows, np.int64)
    _k._coupled_ensemble(
        np.uint64(master_seed & (2**64 - 1)), n_replicas, geom.n_rows,
        geom.width, params.N, rod_row, probs, mode, tag_row, tag_col,
        _coupled_rates(params), float(max(t_end, ct[-1])), ct,
        rep_tag, rep_disc, rep_viol, eta_rows, zeta_rows,
        1 if accumulate_rows else 0)
    return CoupledEnsemble(
        check_times=ct,
        tag_row=tag_row,
        tag_col=tag_col,
        alive=rep_tag[:, :, 0],
        rows=rep_tag[:, :, 1],
        cols=rep_tag[:, :, 2],
        dx=rep_tag[:, :, 3],
        discrepancies=rep_disc,
        violations=rep_viol,
        n_replicas=n_replicas,
        eta_row_mean=eta_rows / n_replicas if accumulate_rows else None,
        zeta_row_mean=zeta_rows / n_replicas if accumulate_rows else None,
    )


def tagged_ensemble(params: Params, geom: LatticeGeometry, master_seed: int,
                    n_replicas: int, t_end: float, check_times, tag_y: int,
                    tag_col: int, rod_y: int = 0,
                    accumulate_rows: bool = False) -> CoupledEnsemble:
    """zeta from the conditioned product measure with the tag site forced
    empty; eta adds one particle there, carrying the tag."""
    return _run_coupled_ensemble(params, geom, master_seed, n_replicas,
                                 t_end, check_times, 0, tag_y, tag_col,
                                 rod_y, accumulate_rows)


def independent_pair_ensemble(params: Params, geom: LatticeGeometry,
                              master_seed: int, n_replicas: int,
                              t_end: float, check_times,
                              rod_y: int = 0) -> CoupledEnsemble:
    """eta and zeta sampled independently; many discrepancies, no tag."""
    return _run_coupled_ensemble(params, geom, master_seed, n_replicas,
                                 t_end, check_times, 1, 0, 0, rod_y, False)


@dataclass
class ScanPoint:
    gamma1: float
    at_start: float
    stderr: float
    alive: float


def return_probability_scan(params: Params, geom: LatticeGeometry,
                            gamma1_values, master_seed: int,
                            n_replicas: int, t: float, tag_y: int,
                            tag_col: int, rod_y: int = 0) -> list[ScanPoint]:
    """P(tag back at its starting site at time t) for each swap rate; each
    rate gets an independently derived replica family."""
    out = []
    for k, g1 in enumerate(gamma1_values):
        par = replace(params, gamma1=float(g1))
        seed = derive_master(master_seed, k)
        ens = tagged_ensemble(par, geom, seed, n_replicas, t, [t], tag_y,
                              tag_col, rod_y)
        p = ens.at_start_prob(0)
        se = float(np.sqrt(max(p * (1.0 - p), 1e-300) / n_replicas))
        out.append(ScanPoint(float(g1), p, se, ens.alive_prob(0)))
    return out
