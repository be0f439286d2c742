"""Model primitives: parameters, lattice geometry, states, density profile.

Sites are addressed as (column, height).  A rod of length N at height y
occupies the sites (0, y) ... (N-1, y); monomers never sit on rod sites.
Heights run over the closed window [vmin, vmax]; columns wrap periodically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import _fill_bernoulli
from .rng import RngStream


@dataclass(frozen=True)
class Params:
    """Model rates.  p/q vertical monomer bias (p < q pushes down), a/b rod
    trial rates, gamma1/gamma2 horizontal and vertical fluid clock speeds."""

    p: float
    q: float
    a: float
    b: float
    gamma1: float
    gamma2: float
    kappa: float
    N: int

    def __post_init__(self):
        if not (0.0 <= self.p < self.q < math.inf):
            raise ValueError(f"need 0 <= p < q < inf, got p={self.p}, q={self.q}")
        for name in ("a", "b", "gamma1", "gamma2"):
            v = getattr(self, name)
            if not (0.0 <= v < math.inf):
                raise ValueError(f"need 0 <= {name} < inf, got {v}")
        if not (0.0 < self.kappa < math.inf):
            raise ValueError(f"need 0 < kappa < inf, got {self.kappa}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"need integer N >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def alpha(self) -> float:
        """log(b/a); positive when the rod is biased downward."""
        if self.a == 0.0 and self.b == 0.0:
            raise ValueError("alpha undefined when a == b == 0")
        if self.a == 0.0:
            return math.inf
        if self.b == 0.0:
            return -math.inf
        return math.log(self.b / self.a)

    @property
    def beta(self) -> float:
        """log(q/p); +inf when p == 0."""
        if self.p == 0.0:
            return math.inf
        return math.log(self.q / self.p)


@dataclass(frozen=True)
class LatticeGeometry:
    """Periodic width and closed height window."""

    width: int
    vmin: int
    vmax: int

    def __post_init__(self):
        if self.width < 2:
            raise ValueError(f"need width >= 2, got {self.width}")
        if not (self.vmin < 0 < self.vmax):
            raise ValueError(
                f"need vmin < 0 < vmax, got vmin={self.vmin}, vmax={self.vmax}"
            )

    @property
    def n_rows(self) -> int:
        return self.vmax - self.vmin + 1

    def heights(self) -> np.ndarray:
        return np.arange(self.vmin, self.vmax + 1)

    def row_of(self, y: int) -> int:
        if not (self.vmin <= y <= self.vmax):
            raise ValueError(f"height {y} outside [{self.vmin}, {self.vmax}]")
        return y - self.vmin

    def height_of(self, row: int) -> int:
        return row + self.vmin

    def require_fits(self, N: int) -> None:
        if self.width < N:
            raise ValueError(f"rod of length {N} does not fit in width {self.width}")


def rod_region(y: int, N: int) -> list[tuple[int, int]]:
    """Sites (column, height) covered by the rod at height y."""
    return [(c, y) for c in range(N)]


def density_profile(params: Params, y):
    """Equilibrium fluid density kappa*(p/q)**y / (1 + kappa*(p/q)**y).

    Evaluated in log space; accepts scalars or arrays, y need not be an
    integer.  For p == 0 the step-profile limit is returned.
    """
    arr = np.asarray(y, dtype=float)
    if params.p == 0.0:
        k0 = params.kappa / (1.0 + params.kappa)
        out = np.where(arr > 0, 0.0, np.where(arr < 0, 1.0, k0))
    else:
        u = math.log(params.kappa) - params.beta * arr
        out = np.where(
            u >= 0, 1.0 / (1.0 + np.exp(-u)), np.exp(u) / (1.0 + np.exp(u))
        )
    if np.isscalar(y):
        return float(out)
    return out


def log_vacancy(params: Params, y):
    """log(1 - rho(y)), stable for strongly negative heights."""
    arr = np.asarray(y, dtype=float)
    if params.p == 0.0:
        k0 = math.log1p(-params.kappa / (1.0 + params.kappa))
        out = np.where(arr > 0, 0.0, np.where(arr < 0, -np.inf, k0))
    else:
        u = math.log(params.kappa) - params.beta * arr
        # -log(1 + e^u) without overflow
        out = -(np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u))))
    if np.isscalar(y):
        return float(out)
    return out


@dataclass
class FullState:
    """Occupancy field (rows indexed from vmin upward) plus rod height."""

    occ: np.ndarray
    rod_y: int

    def copy(self) -> "FullState":
        return FullState(self.occ.copy(), self.rod_y)

    def particle_count(self) -> int:
        return int(self.occ.sum())

    def row_counts(self) -> np.ndarray:
        return self.occ.sum(axis=1).astype(np.int64)


def check_state(state: FullState, geom: LatticeGeometry, N: int) -> None:
    """Raise if the exclusion constraints are violated."""
    geom.require_fits(N)
    if state.occ.shape != (geom.n_rows, geom.width):
        raise ValueError(
            f"occupancy shape {state.occ.shape} != {(geom.n_rows, geom.width)}"
        )
    vals = np.unique(state.occ)
    if not np.all(np.isin(vals, [0, 1])):
        raise ValueError("occupancy entries must be 0 or 1")
    if not (geom.vmin <= state.rod_y <= geom.vmax):
        raise ValueError(f"rod height {state.rod_y} outside window")
    r = geom.row_of(state.rod_y)
    if state.occ[r, :N].any():
        raise ValueError("monomer on rod-covered site")


def sample_initial(
    params: Params, geom: LatticeGeometry, rod_y: int, rng: RngStream
) -> FullState:
    """Sample the product measure at profile rho conditioned on an empty rod
    region at rod_y (conditioning just forces those sites to zero)."""
    geom.require_fits(params.N)
    rod_row = geom.row_of(rod_y)
    probs = density_profile(params, geom.heights()).astype(np.float64)
    occ = np.empty((geom.n_rows, geom.width), dtype=np.uint8)
    _fill_bernoulli(rng.state, occ, probs, rod_row, params.N)
    return FullState(occ, rod_y)
