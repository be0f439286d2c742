"""Effective birth-death walk of the rod through a frozen fluid profile.

When the fluid relaxes infinitely fast, the rod sees each target stretch as
N independent sites at the local density, so it performs a nearest-neighbour
walk with rates a(1-rho(y+1))^N up and b(1-rho(y-1))^N down.  The walk is
reversible; its stationary law and the continuous approximation (with
normalizer, mean and mode in closed form) live here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from . import _kernels as _k
from .model import Params, log_vacancy
from .rng import RngStream


def rw_rates(params: Params,
             heights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Up/down rates on a closed height window (top up and bottom down
    rates are zero)."""
    y = np.asarray(heights, dtype=np.float64)
    if y.ndim != 1 or y.size < 2 or np.any(np.diff(y) != 1):
        raise ValueError("heights must be consecutive integers")
    up = params.a * np.exp(params.N * log_vacancy(params, y + 1))
    down = params.b * np.exp(params.N * log_vacancy(params, y - 1))
    up[-1] = 0.0
    down[0] = 0.0
    return up, down


def log_stationary_weight(params: Params, heights) -> np.ndarray:
    """log m(y) up to a constant: -alpha*y + N*log(1-rho(y))."""
    y = np.asarray(heights, dtype=np.float64)
    return -params.alpha * y + params.N * log_vacancy(params, y)


def _require_normalizable(params: Params) -> None:
    al, be = params.alpha, params.beta
    if not (0.0 < al < params.N * be):
        raise ValueError(
            f"walk not normalizable: need 0 < log(b/a) < N*log(q/p), "
            f"got alpha={al:.6g}, N*beta={params.N * be:.6g}")


def stationary_measure(params: Params,
                       heights=None) -> tuple[np.ndarray, np.ndarray]:
    """Normalized stationary law of the walk.

    With explicit heights the law is the exact restriction to that window.
    Without, the window is chosen automatically to capture the mass, which
    requires 0 < alpha < N*beta; outside that range the walk escapes and a
    ValueError is raised.
    """
    if heights is None:
        _require_normalizable(params)
        al, be, n = params.alpha, params.beta, params.N
        center = int(round(np.log(n * be / al - 1.0) / be)) if n * be > al \
            else 0
        top = _log_weight_scalar(params, center)
        lo = center
        while top - _log_weight_scalar(params, lo - 1) < 60.0:
            lo -= 1
        hi = center
        while top - _log_weight_scalar(params, hi + 1) < 60.0:
            hi += 1
        heights = np.arange(lo - 1, hi + 2)
    y = np.asarray(heights, dtype=np.int64)
    logw = log_stationary_weight(params, y)
    return y, np.exp(logw - logsumexp(logw))


def _log_weight_scalar(params: Params, y: int) -> float:
    return float(log_stationary_weight(params, np.array([y]))[0])


def detailed_balance_residual(params: Params, heights) -> float:
    """max |m(y) up(y) - m(y+1) down(y+1)| on the window, with m
    normalized; zero in exact arithmetic."""
    y, m = stationary_measure(params, heights)
    up, down = rw_rates(params, y)
    return float(np.abs(m[:-1] * up[:-1] - m[1:] * down[1:]).max())


# ----------------------------------------------------- continuous profile

def continuous_normalizer(alpha: float, beta: float, n: int,
                          kappa: float = 1.0) -> float:
    """integral of exp(-alpha x) (1 + kappa exp(-beta x))^-n over the line:
    kappa^(-alpha/beta) Gamma(alpha/beta) Gamma(n-alpha/beta) /
    (beta Gamma(n))."""
    _check_cont(alpha, beta, n, kappa)
    r = alpha / beta
    return float(np.exp(gammaln(r) + gammaln(n - r) - gammaln(n)
                        - r * np.log(kappa)) / beta)


def continuous_mean(alpha: float, beta: float, n: int,
                    kappa: float = 1.0) -> float:
    """Mean of the continuous profile:
    (digamma(n-alpha/beta) - digamma(alpha/beta) + log kappa)/beta."""
    _check_cont(alpha, beta, n, kappa)
    r = alpha / beta
    return float((digamma(n - r) - digamma(r) + np.log(kappa)) / beta)


def modus(alpha: float, beta: float, n: int, kappa: float = 1.0) -> float:
    """Interior maximum of the continuous profile:
    (log(n beta/alpha - 1) + log kappa)/beta."""
    _check_cont(alpha, beta, n, kappa)
    return float((np.log(n * beta / alpha - 1.0) + np.log(kappa)) / beta)


def _check_cont(alpha: float, beta: float, n: int, kappa: float) -> None:
    if beta <= 0 or kappa <= 0:
        raise ValueError("need beta > 0 and kappa > 0")
    if not float(n).is_integer() or n < 1:
        raise ValueError("n must be a positive integer")
    if not 0.0 < alpha < n * beta:
        raise ValueError(
            f"profile not integrable: need 0 < alpha < n*beta, "
            f"got alpha={alpha:.6g}, n*beta={n * beta:.6g}")


# ------------------------------------------------------------- simulation

@dataclass
class WalkRun:
    """One realisation of the effective walk."""

    heights: np.ndarray
    t_final: float
    n_events: int
    final_height: int
    occupation: np.ndarray  # time spent per height
    check_times: np.ndarray
    check_heights: np.ndarray
    times: np.ndarray
    trajectory: np.ndarray


def simulate_rw(params: Params, heights, rng: RngStream, t_end: float,
                y0: int, max_events: int | None = None,
                check_times=None, record_trajectory: bool = False) -> WalkRun:
    y = np.asarray(heights, dtype=np.int64)
    up, down = rw_rates(params, y)
    i0 = int(np.searchsorted(y, y0))
    if i0 >= y.size or y[i0] != y0:
        raise ValueError("y0 outside the height window")
    ct = np.asarray([] if check_times is None else check_times, np.float64)
    occ_time = np.zeros(y.size)
    out_idx = np.empty(ct.size, np.int64)
    me = _k.BIG_EVENTS if max_events is None else int(max_events)
    cap = 4096
    s0 = rng.state.copy()
    while True:
        rng.state[:] = s0
        occ_time[:] = 0.0
        traj_t = np.empty(cap if record_trajectory else 0, np.float64)
        traj_i = np.empty(cap if record_trajectory else 0, np.int64)
        t, nev, ntraj, status, i_fin = _k._rw_run(
            rng.state, i0, up, down, float(t_end), me, ct, out_idx,
            occ_time, 1 if record_trajectory else 0, traj_t, traj_i)
        if status == 0:
            break
        cap *= 4
    return WalkRun(
        heights=y,
        t_final=float(t),
        n_events=int(nev),
        final_height=int(y[i_fin]),
        occupation=occ_time,
        check_times=ct,
        check_heights=(y[out_idx] if ct.size else np.empty(0, np.int64)),
        times=traj_t[:ntraj].copy(),
        trajectory=y[traj_i[:ntraj]].copy(),
    )


def rw_law(params: Params, heights, master_seed: int, n_replicas: int,
           t_end: float, y0: int, check_times) -> np.ndarray:
    """Replica counts of the walk position: shape (n_check, n_heights)."""
    y = np.asarray(heights, dtype=np.int64)
    up, down = rw_rates(params, y)
    i0 = int(np.searchsorted(y, y0))
    if i0 >= y.size or y[i0] != y0:
        raise ValueError("y0 outside the height window")
    ct = np.asarray(check_times, np.float64)
    counts = np.zeros((ct.size, y.size), np.int64)
    _k._rw_ensemble(np.uint64(master_seed & (2**64 - 1)), n_replicas, i0,
                    up, down, float(max(t_end, ct[-1])), ct, counts)
    return counts
