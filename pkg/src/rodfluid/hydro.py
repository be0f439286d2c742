"""Macroscopic density evolution and the rod walk driven by it.

Row densities follow the closed-boundary lattice conservation law
d rho_i/dt = F_{i-1} - F_i with bond flux
F_i = p rho_i (1 - rho_{i+1}) - q rho_{i+1} (1 - rho_i), integrated with
classical RK4.  The telescoping right side conserves total mass to
roundoff; the equilibrium sigmoid profile makes every bond flux vanish, so
it is a fixed point of the scheme, not just of the PDE.  A rod walking
through the evolving profile is sampled by thinning against the constant
bound a + b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k


def bond_flux(rho: np.ndarray, p: float, q: float) -> np.ndarray:
    """Net upward flux on each of the H-1 interior bonds."""
    lo = rho[:-1]
    hi = rho[1:]
    return p * lo * (1.0 - hi) - q * hi * (1.0 - lo)


def density_rhs(rho: np.ndarray, p: float, q: float) -> np.ndarray:
    F = bond_flux(rho, p, q)
    out = np.empty_like(rho)
    out[0] = -F[0]
    out[-1] = F[-1]
    out[1:-1] = F[:-1] - F[1:]
    return out


@dataclass
class DensityEvolution:
    """RK4 frames of the row-density profile."""

    times: np.ndarray     # (n_frames,)
    frames: np.ndarray    # (n_frames, H)
    dt: float

    @property
    def mass(self) -> np.ndarray:
        return self.frames.sum(axis=1)

    def mass_drift_rate(self) -> float:
        """Largest |mass(t) - mass(0)| per unit time."""
        if self.times[-1] <= 0:
            return 0.0
        dm = np.abs(self.mass - self.mass[0])
        return float(dm.max() / max(self.times[-1], 1e-300))


def stability_dt(p: float, q: float) -> float:
    return 0.1 / (p + q)


def integrate_density(rho0: np.ndarray, p: float, q: float, t_end: float,
                      n_steps: int | None = None,
                      frame_stride: int = 1) -> DensityEvolution:
    """March rho0 to t_end with fixed-step RK4.

    The step t_end/n_steps must respect the explicit-scheme bound
    0.1/(p+q); by default the largest compliant round step count is used.
    Frames are stored every frame_stride steps (first and last always).
    """
    rho = np.asarray(rho0, dtype=np.float64).copy()
    if rho.ndim != 1 or rho.size < 2:
        raise ValueError("rho0 must be a 1-d profile with >= 2 rows")
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise ValueError("rho0 must lie in [0, 1]")
    if q <= 0 or p < 0 or p >= q:
        raise ValueError("need 0 <= p < q")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if n_steps is None:
        n_steps = max(int(np.ceil(t_end / stability_dt(p, q))), 1)
    h = t_end / n_steps
    if h > stability_dt(p, q) * (1.0 + 1e-12):
        raise ValueError(
            f"step {h:.6g} exceeds the stability bound "
            f"{stability_dt(p, q):.6g}; raise n_steps")
    if frame_stride < 1:
        raise ValueError("frame_stride must be >= 1")

    times = [0.0]
    frames = [rho.copy()]
    for k in range(n_steps):
        k1 = density_rhs(rho, p, q)
        k2 = density_rhs(rho + 0.5 * h * k1, p, q)
        k3 = density_rhs(rho + 0.5 * h * k2, p, q)
        k4 = density_rhs(rho + h * k3, p, q)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % frame_stride == 0 or k == n_steps - 1:
            times.append((k + 1) * h)
            frames.append(rho.copy())
    return DensityEvolution(np.asarray(times), np.vstack(frames), h)


def ramp_profile(n_rows: int, rho_bottom: float, rho_top: float) -> np.ndarray:
    """Linear ramp initial condition."""
    if not (0.0 <= rho_bottom <= 1.0 and 0.0 <= rho_top <= 1.0):
        raise ValueError("ramp endpoints must lie in [0, 1]")
    return np.linspace(rho_bottom, rho_top, n_rows)


def rod_walk_through_profile(evo: DensityEvolution, heights, N: int,
                             a: float, b: float, y0: int, master_seed: int,
                             n_replicas: int, check_times) -> np.ndarray:
    """Replica counts of the rod walking through the evolving profile:
    shape (n_check, n_heights).  Rates at time t are a(1-rho(y+1,t))^N up
    and b(1-rho(y-1,t))^N down, rho interpolated linearly between frames."""
    y = np.asarray(heights, dtype=np.int64)
    if y.size != evo.frames.shape[1]:
        raise ValueError("heights must match the profile rows")
    if a < 0 or b < 0 or a + b <= 0:
        raise ValueError("need a, b >= 0 with a + b > 0")
    i0 = int(np.searchsorted(y, y0))
    if i0 >= y.size or y[i0] != y0:
        raise ValueError("y0 outside the height window")
    ct = np.asarray(check_times, np.float64)
    if ct.size == 0 or np.any(np.diff(ct) <= 0) or ct[0] <= 0:
        raise ValueError("check_times must be nonempty, increasing, > 0")
    counts = np.zeros((ct.size, y.size), np.int64)
    _k._rw_inhom_ensemble(
        np.uint64(master_seed & (2**64 - 1)), n_replicas, i0, N,
        float(a), float(b), evo.frames, evo.times, float(ct[-1]), ct, counts)
    return counts
