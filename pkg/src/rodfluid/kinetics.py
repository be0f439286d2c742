"""Event-driven dynamics of the rod-in-fluid lattice model.

The engine keeps one exponential clock for the whole system: per-row counts
of eligible moves weight a single categorical draw, so each event costs two
uniforms plus a local index update.  `EngineState.verify` recomputes every
count from scratch and is the safety net for the incremental bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as _k
from .model import FullState, LatticeGeometry, Params, density_profile
from .rng import RngStream

EVENT_HSWAP = 0
EVENT_VUP = 1
EVENT_VDOWN = 2
EVENT_ROD_UP = 3
EVENT_ROD_DOWN = 4

COUNTER_NAMES = (
    "hswap", "vup", "vdown", "rod_up_trials", "rod_down_trials",
    "rod_up_moves", "rod_down_moves",
)


def rates_vector(params: Params) -> np.ndarray:
    """Kernel rate bundle [gamma1/2, gamma2*p, gamma2*q, a, b]."""
    return np.array(
        [params.gamma1 / 2.0, params.gamma2 * params.p,
         params.gamma2 * params.q, params.a, params.b],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class Event:
    code: int
    dt: float
    row: int
    col: int
    success: bool


class EngineState:
    """Field, rod row, and the incremental rate index, ready to step."""

    def __init__(self, occ: np.ndarray, geom: LatticeGeometry, N: int,
                 rod_row: int):
        self.occ = occ
        self.geom = geom
        self.N = N
        hcnt, ucnt, dcnt, scal = _k._init_counts(occ, rod_row, N)
        self.hcnt = hcnt
        self.ucnt = ucnt
        self.dcnt = dcnt
        self.scal = scal

    @classmethod
    def from_state(cls, state: FullState, geom: LatticeGeometry,
                   N: int) -> "EngineState":
        return cls(state.occ.copy(), geom, N, geom.row_of(state.rod_y))

    @property
    def rod_row(self) -> int:
        return int(self.scal[0])

    @property
    def rod_y(self) -> int:
        return self.geom.height_of(self.rod_row)

    def to_state(self) -> FullState:
        return FullState(self.occ.copy(), self.rod_y)

    def total_rate(self, params: Params) -> float:
        r = rates_vector(params)
        return float(r[0] * self.scal[1] + r[1] * self.scal[2]
                     + r[2] * self.scal[3] + r[3] + r[4])

    def verify(self) -> None:
        """Recount every row from scratch; raise if the index drifted."""
        hcnt, ucnt, dcnt, scal = _k._init_counts(self.occ, self.rod_row,
                                                 self.N)
        ok = (np.array_equal(hcnt, self.hcnt)
              and np.array_equal(ucnt, self.ucnt)
              and np.array_equal(dcnt, self.dcnt)
              and np.array_equal(scal, self.scal))
        if not ok:
            raise AssertionError(
                "rate index out of sync:\n"
                f"  hcnt {self.hcnt.tolist()} vs {hcnt.tolist()}\n"
                f"  ucnt {self.ucnt.tolist()} vs {ucnt.tolist()}\n"
                f"  dcnt {self.dcnt.tolist()} vs {dcnt.tolist()}\n"
                f"  scal {self.scal.tolist()} vs {scal.tolist()}"
            )


def step(es: EngineState, params: Params, rng: RngStream,
         stirred: bool = False) -> Event:
    """Advance one event in place; returns what fired and its holding time."""
    code, dt, r, c, succ = _k._step_event(
        es.occ, es.hcnt, es.ucnt, es.dcnt, es.scal, rates_vector(params),
        es.N, rng.state, 1 if stirred else 0)
    return Event(int(code), float(dt), int(r), int(c), bool(succ))


def stirring_equilibrate(es: EngineState, rng: RngStream) -> None:
    """Uniformly permute each row's free sites (the infinite-swap-rate
    limit applied instantaneously), then refresh the rate index."""
    _k._stir_all(rng.state, es.occ, es.rod_row, es.N)
    _k._recount_rows(es.occ, es.hcnt, es.ucnt, es.dcnt, es.scal, es.N,
                     0, es.geom.n_rows - 1)


@dataclass
class Trajectory:
    """One realisation: successful rod moves plus checkpoint readings."""

    times: np.ndarray
    heights: np.ndarray
    t_final: float
    n_events: int
    counters: dict[str, int]
    final: FullState
    check_times: np.ndarray
    check_heights: np.ndarray

    def height_at(self, t: float, y0: int) -> int:
        """Piecewise-constant lookup (right-continuous)."""
        k = int(np.searchsorted(self.times, t, side="right"))
        return y0 if k == 0 else int(self.heights[k - 1])


def _checked_times(check_times, t_end: float) -> np.ndarray:
    ct = np.asarray([] if check_times is None else check_times,
                    dtype=np.float64)
    if ct.ndim != 1 or (ct.size and (np.any(np.diff(ct) <= 0)
                                     or ct[0] <= 0 or ct[-1] > t_end)):
        raise ValueError(
            "check_times must be strictly increasing within (0, t_end]")
    return ct


def simulate(params: Params, geom: LatticeGeometry, rng: RngStream,
             t_end: float, rod_y0: int = 0,
             check_times=None, initial: FullState | None = None,
             mode: str = "exact", stirred_vertical: bool = True,
             record_trajectory: bool = True) -> Trajectory:
    """Run one realisation to t_end.

    The initial field is sampled from the product measure conditioned on an
    empty rod region unless `initial` is given.  mode "stirred" permutes
    every row's free sites immediately before each rod trial; with
    stirred_vertical off the vertical clocks are silenced too, so the fluid
    changes only by stirring.
    """
    if mode not in ("exact", "stirred"):
        raise ValueError(f"unknown mode {mode!r}")
    geom.require_fits(params.N)
    ct = _checked_times(check_times, t_end)
    rates = rates_vector(params)
    stir = 0
    if mode == "stirred":
        stir = 1
        if not stirred_vertical:
            rates[1] = 0.0
            rates[2] = 0.0

    if initial is None:
        probs = density_profile(params, geom.heights()).astype(np.float64)
        occ0 = np.zeros((geom.n_rows, geom.width), np.uint8)
        _k._fill_bernoulli(rng.state, occ0, probs, geom.row_of(rod_y0),
                           params.N)
    else:
        occ0 = initial.occ.copy()
        rod_y0 = initial.rod_y
    s_run = rng.state.copy()
    cap = 32 + int(4.0 * (params.a + params.b) * t_end)

    while True:
        rng.state[:] = s_run
        es = EngineState(occ0.copy(), geom, params.N, geom.row_of(rod_y0))
        out_rows = np.empty(ct.shape[0], np.int64)
        counters = np.zeros(8, np.int64)
        traj_t = np.empty(cap if record_trajectory else 0, np.float64)
        traj_y = np.empty(cap if record_trajectory else 0, np.int64)
        t, nev, ntraj, status = _k._run(
            es.occ, es.hcnt, es.ucnt, es.dcnt, es.scal, rates, params.N,
            rng.state, 0.0, t_end, _k.BIG_EVENTS, ct, out_rows,
            1 if record_trajectory else 0, traj_t, traj_y, counters, stir)
        if status == 0:
            break
        # buffer overflow: replay the same draws with more room
        cap *= 4

    vmin = geom.vmin
    return Trajectory(
        times=traj_t[:ntraj].copy(),
        heights=traj_y[:ntraj] + vmin,
        t_final=float(t),
        n_events=int(nev),
        counters={n: int(counters[i]) for i, n in enumerate(COUNTER_NAMES)},
        final=es.to_state(),
        check_times=ct,
        check_heights=out_rows + vmin,
    )


@dataclass
class RodLaw:
    """Empirical rod-height law over replicas at each checkpoint."""

    check_times: np.ndarray
    heights: np.ndarray
    counts: np.ndarray  # (n_check, n_heights)
    n_replicas: int
    row_mean: np.ndarray | None = None  # mean monomers per row at t_end

    def pmf(self, k: int = -1) -> np.ndarray:
        return self.counts[k] / self.n_replicas


def run_rod_law(params: Params, geom: LatticeGeometry, master_seed: int,
                n_replicas: int, t_end: float, check_times,
                rod_y0: int = 0, mode: str = "exact",
                stirred_vertical: bool = True,
                accumulate_rows: bool = False) -> RodLaw:
    """Replica ensemble of rod heights; replica i uses stream i of the
    master seed, so any replica count is reproducible and extendable."""
    if mode not in ("exact", "stirred"):
        raise ValueError(f"unknown mode {mode!r}")
    geom.require_fits(params.N)
    ct = np.asarray(check_times, dtype=np.float64)
    if ct.size == 0 or np.any(np.diff(ct) <= 0) or ct[0] <= 0:
        raise ValueError("check_times must be nonempty, increasing, > 0")
    t_end = float(max(t_end, ct[-1]))
    rates = rates_vector(params)
    stir = 0
    if mode == "stirred":
        stir = 1
        if not stirred_vertical:
            rates[1] = 0.0
            rates[2] = 0.0
    probs = density_profile(params, geom.heights()).astype(np.float64)
    counts = np.zeros((ct.shape[0], geom.n_rows), np.int64)
    row_accum = np.zeros(geom.n_rows, np.int64)
    _k._ensemble_rod_law(
        np.uint64(master_seed & (2**64 - 1)), n_replicas, geom.n_rows,
        geom.width, params.N, probs, geom.row_of(rod_y0), rates,
        float(t_end), ct, counts, row_accum, 1 if accumulate_rows else 0,
        stir)
    return RodLaw(
        check_times=ct,
        heights=geom.heights(),
        counts=counts,
        n_replicas=n_replicas,
        row_mean=row_accum / n_replicas if accumulate_rows else None,
    )


def trial_statistics(params: Params, geom: LatticeGeometry, master_seed: int,
                     n_replicas: int, t_end: float, rod_y0: int = 0,
                     mode: str = "exact") -> dict[str, int]:
    """Pooled event counters over an ensemble (trials vs successes)."""
    geom.require_fits(params.N)
    probs = density_profile(params, geom.heights()).astype(np.float64)
    counters = _k._trial_stats(
        np.uint64(master_seed & (2**64 - 1)), n_replicas, geom.n_rows,
        geom.width, params.N, probs, geom.row_of(rod_y0),
        rates_vector(params), float(t_end),
        1 if mode == "stirred" else 0)
    return {n: int(counters[i]) for i, n in enumerate(COUNTER_NAMES)}


def hypergeometric_empty_prob(width: int, rod_len: int, k: int) -> float:
    """P(a fixed rod_len-site stretch is empty) when k monomers sit
    uniformly on width sites of a ring row."""
    if not 0 <= k <= width or not 0 <= rod_len <= width:
        raise ValueError("need 0 <= k <= width and 0 <= rod_len <= width")
    if k + rod_len > width:
        return 0.0
    return float(Fraction(math.comb(width - rod_len, k), math.comb(width, k)))


def first_step_distribution(state: FullState, geom: LatticeGeometry,
                            params: Params, master_seed: int,
                            n_samples: int) -> dict[int, int]:
    """Sample the embedded one-step chain from a fixed state; keys are
    bit-packed (field, rod row) codes for comparison against an exact
    generator."""
    if geom.n_rows * geom.width + 4 > 64:
        raise ValueError("state key would not fit in 64 bits")
    keys = np.empty(n_samples, np.uint64)
    _k._first_step_tally(state.occ, geom.row_of(state.rod_y), params.N,
                         rates_vector(params),
                         np.uint64(master_seed & (2**64 - 1)), n_samples,
                         keys)
    uniq, cnt = np.unique(keys, return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, cnt)}


def encode_state(state: FullState, geom: LatticeGeometry) -> int:
    """Bit-packed (field, rod row) key matching the kernel encoding."""
    return int(_k._encode_state(state.occ, geom.row_of(state.rod_y)))
