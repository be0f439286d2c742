"""Density transport scheme and the rod walk over an evolving profile.

Order of accuracy is measured directly by step halving against a fine
reference, and the inhomogeneous walk is checked against uniformization of
the matching fixed birth-death chain when the profile is frozen.
"""

import numpy as np
import pytest

from rodfluid.hydro import DensityEvolution, bond_flux, density_rhs, \
    integrate_density, ramp_profile, rod_walk_through_profile, stability_dt
from rodfluid.limit_walk import rw_rates
from rodfluid.model import Params, density_profile
from rodfluid.oracle import birth_death_generator, transient_law


def make_params(**kw):
    base = dict(p=0.5, q=1.0, a=0.7, b=1.1, gamma1=0.9, gamma2=1.0,
                kappa=0.8, N=2)
    base.update(kw)
    return Params(**base)


def test_equilibrium_profile_is_a_fixed_point():
    params = make_params()
    y = np.arange(-8, 9)
    rho0 = density_profile(params, y)
    assert np.abs(bond_flux(rho0, params.p, params.q)).max() < 1e-16
    evo = integrate_density(rho0, params.p, params.q, t_end=10.0)
    assert np.abs(evo.frames[-1] - rho0).max() < 1e-12


def test_mass_is_conserved():
    rho0 = ramp_profile(25, 0.9, 0.1)
    evo = integrate_density(rho0, 0.3, 1.0, t_end=8.0)
    assert evo.mass_drift_rate() < 1e-12
    assert np.abs(density_rhs(rho0, 0.3, 1.0).sum()) < 1e-14


def test_step_halving_shows_fourth_order():
    rho0 = ramp_profile(21, 0.2, 0.8)
    p, q, T = 0.5, 1.0, 2.0
    ref = integrate_density(rho0, p, q, T, n_steps=1280).frames[-1]
    e1 = np.abs(integrate_density(rho0, p, q, T, n_steps=40).frames[-1]
                - ref).max()
    e2 = np.abs(integrate_density(rho0, p, q, T, n_steps=80).frames[-1]
                - ref).max()
    assert 12.0 < e1 / e2 < 20.0


def test_integration_guards():
    rho0 = ramp_profile(10, 0.1, 0.9)
    with pytest.raises(ValueError, match="stability"):
        integrate_density(rho0, 0.5, 1.0, t_end=10.0, n_steps=3)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        integrate_density(rho0 + 0.5, 0.5, 1.0, t_end=1.0)
    with pytest.raises(ValueError, match="0 <= p < q"):
        integrate_density(rho0, 1.0, 0.5, t_end=1.0)
    with pytest.raises(ValueError, match="t_end"):
        integrate_density(rho0, 0.5, 1.0, t_end=0.0)
    with pytest.raises(ValueError, match="frame_stride"):
        integrate_density(rho0, 0.5, 1.0, t_end=1.0, frame_stride=0)
    with pytest.raises(ValueError, match="1-d"):
        integrate_density(np.zeros((3, 3)), 0.5, 1.0, t_end=1.0)
    with pytest.raises(ValueError, match="endpoints"):
        ramp_profile(10, -0.1, 0.5)


def test_stability_bound_formula():
    assert stability_dt(0.5, 1.0) == pytest.approx(0.1 / 1.5)


def test_frame_stride_keeps_ends():
    rho0 = ramp_profile(12, 0.3, 0.6)
    evo = integrate_density(rho0, 0.5, 1.0, t_end=1.0, n_steps=30,
                            frame_stride=7)
    assert evo.times[0] == 0.0
    assert evo.times[-1] == pytest.approx(1.0)
    assert evo.frames.shape[0] == evo.times.size


def frozen_evolution(params, y, t_end):
    rho = density_profile(params, y)
    return DensityEvolution(np.array([0.0, t_end]), np.vstack([rho, rho]),
                            t_end)


def test_walk_on_frozen_profile_matches_uniformization():
    params = make_params()
    y = np.arange(-8, 9)
    evo = frozen_evolution(params, y, 2.0)
    check_times = [0.5, 1.0, 2.0]
    n_rep = 20000
    counts = rod_walk_through_profile(evo, y, params.N, params.a, params.b,
                                      0, 424242, n_rep, check_times)
    up, down = rw_rates(params, y)
    Q = birth_death_generator(up, down)
    p0 = np.zeros(y.size)
    p0[8] = 1.0
    for k, t in enumerate(check_times):
        assert counts[k].sum() == n_rep
        law = transient_law(Q, p0, t)
        tv = 0.5 * np.abs(counts[k] / n_rep - law).sum()
        assert tv < 0.02, f"TV {tv:.4f} at t={t}"


def test_walk_is_deterministic():
    params = make_params()
    y = np.arange(-4, 5)
    evo = frozen_evolution(params, y, 1.0)
    args = (evo, y, params.N, params.a, params.b, 0)
    a_ = rod_walk_through_profile(*args, 99, 500, [1.0])
    b_ = rod_walk_through_profile(*args, 99, 500, [1.0])
    c_ = rod_walk_through_profile(*args, 98, 500, [1.0])
    assert np.array_equal(a_, b_)
    assert not np.array_equal(a_, c_)


def test_walk_input_validation():
    params = make_params()
    y = np.arange(-4, 5)
    evo = frozen_evolution(params, y, 1.0)
    with pytest.raises(ValueError, match="heights"):
        rod_walk_through_profile(evo, y[:-1], params.N, params.a, params.b,
                                 0, 1, 10, [1.0])
    with pytest.raises(ValueError, match="y0"):
        rod_walk_through_profile(evo, y, params.N, params.a, params.b,
                                 40, 1, 10, [1.0])
    with pytest.raises(ValueError, match="check_times"):
        rod_walk_through_profile(evo, y, params.N, params.a, params.b,
                                 0, 1, 10, [])
    with pytest.raises(ValueError, match="a, b"):
        rod_walk_through_profile(evo, y, params.N, -1.0, params.b,
                                 0, 1, 10, [1.0])
