"""Shared-clock pair dynamics.

The structural claims (discrepancies never created, sitewise ordering kept,
a lone discrepancy never dies) are checked stepwise against the mutable
pair state, then the batched ensemble runner is checked for determinism
and for agreeing with the same invariants.
"""

import numpy as np
import pytest

from rodfluid.coupling import CoupledState, coupled_step, \
    independent_pair_ensemble, return_probability_scan, tagged_ensemble
from rodfluid.model import FullState, LatticeGeometry, Params, sample_initial
from rodfluid.rng import RngStream


def make_params(**kw):
    base = dict(p=0.5, q=1.0, a=0.7, b=1.1, gamma1=0.9, gamma2=1.0,
                kappa=0.8, N=2)
    base.update(kw)
    return Params(**base)


GEOM = LatticeGeometry(width=4, vmin=-2, vmax=2)


def fresh_pair(seed, params, rod_y=0):
    eta = sample_initial(params, GEOM, rod_y, RngStream(seed, 1))
    zeta = sample_initial(params, GEOM, rod_y, RngStream(seed, 2))
    return CoupledState(eta, zeta, GEOM, params.N)


def test_discrepancies_never_created():
    params = make_params()
    for seed in (3, 4, 5):
        cs = fresh_pair(seed, params)
        rng = RngStream(seed, 7)
        last = cs.discrepancies
        for _ in range(3000):
            coupled_step(cs, params, rng)
            assert cs.discrepancies <= last
            last = cs.discrepancies
        assert cs.violations == 0
        cs.verify()


def test_sitewise_order_is_preserved():
    # start with eta >= zeta everywhere; shared clocks keep it that way
    params = make_params()
    rod_row = GEOM.row_of(0)
    zeta_occ = np.zeros((GEOM.n_rows, GEOM.width), np.uint8)
    eta_occ = zeta_occ.copy()
    eta_occ[0, 1] = 1
    eta_occ[1, 3] = 1
    eta_occ[rod_row, 3] = 1
    eta_occ[4, 0] = 1
    cs = CoupledState(FullState(eta_occ, 0), FullState(zeta_occ, 0),
                      GEOM, params.N)
    rng = RngStream(11, 0)
    assert cs.ordered()
    for _ in range(4000):
        coupled_step(cs, params, rng)
        assert cs.ordered()
    assert cs.violations == 0
    cs.verify()


def test_each_copy_conserves_particles():
    params = make_params()
    cs = fresh_pair(9, params)
    n1 = cs.o1.sum()
    n2 = cs.o2.sum()
    rng = RngStream(9, 3)
    for _ in range(2500):
        coupled_step(cs, params, rng)
    assert cs.o1.sum() == n1
    assert cs.o2.sum() == n2


def test_lone_discrepancy_is_immortal():
    # annihilation needs an opposite pair; a single extra particle in eta
    # has nothing to cancel against
    params = make_params()
    zeta_occ = np.zeros((GEOM.n_rows, GEOM.width), np.uint8)
    zeta_occ[1, 2] = 1
    zeta_occ[3, 1] = 1
    eta_occ = zeta_occ.copy()
    eta_occ[2, 3] = 1
    cs = CoupledState(FullState(eta_occ, 0), FullState(zeta_occ, 0),
                      GEOM, params.N)
    cs.set_tag(0, 3)
    rng = RngStream(21, 0)
    for _ in range(3000):
        coupled_step(cs, params, rng)
        assert cs.discrepancies == 1
        assert cs.tag_alive
        r, c = cs.tag_site
        assert int(cs.o1[r, c]) - int(cs.o2[r, c]) != 0
    cs.verify()


def test_set_tag_needs_a_discrepancy():
    params = make_params()
    occ = np.zeros((GEOM.n_rows, GEOM.width), np.uint8)
    occ[0, 0] = 1
    cs = CoupledState(FullState(occ, 0), FullState(occ.copy(), 0),
                      GEOM, params.N)
    with pytest.raises(ValueError, match="no discrepancy"):
        cs.set_tag(-2, 0)


def test_pair_must_share_rod_height():
    params = make_params()
    occ = np.zeros((GEOM.n_rows, GEOM.width), np.uint8)
    with pytest.raises(ValueError, match="rod"):
        CoupledState(FullState(occ, 0), FullState(occ.copy(), 1),
                     GEOM, params.N)


def test_tagged_ensemble_runs_clean():
    params = make_params()
    ens = tagged_ensemble(params, GEOM, 77, 300, 1.0, [0.5, 1.0],
                          tag_y=2, tag_col=1)
    assert ens.alive.shape == (2, 300)
    # lone discrepancy: always alive, count pinned at one
    assert (ens.alive == 1).all()
    assert (ens.discrepancies == 1).all()
    assert (ens.violations == 0).all()
    assert ens.alive_prob() == 1.0
    assert 0.0 <= ens.at_start_prob() <= 1.0


def test_tagged_ensemble_is_deterministic():
    params = make_params()
    kw = dict(t_end=0.6, check_times=[0.3, 0.6], tag_y=1, tag_col=3)
    a = tagged_ensemble(params, GEOM, 123, 200, **kw)
    b = tagged_ensemble(params, GEOM, 123, 200, **kw)
    assert np.array_equal(a.rows, b.rows)
    assert np.array_equal(a.cols, b.cols)
    assert np.array_equal(a.dx, b.dx)
    c = tagged_ensemble(params, GEOM, 124, 200, **kw)
    assert not (np.array_equal(a.rows, c.rows)
                and np.array_equal(a.cols, c.cols)
                and np.array_equal(a.dx, c.dx))


def test_independent_pair_discrepancies_decay():
    params = make_params()
    ens = independent_pair_ensemble(params, GEOM, 55, 400, 2.0,
                                    [0.5, 1.0, 2.0])
    assert (ens.violations == 0).all()
    d = ens.discrepancies.mean(axis=1)
    assert d[0] > d[-1]
    assert (np.diff(ens.discrepancies, axis=0) <= 0).all()


def test_tag_site_inside_rod_rejected():
    params = make_params()
    with pytest.raises(ValueError, match="rod region"):
        tagged_ensemble(params, GEOM, 1, 10, 1.0, [1.0], tag_y=0,
                        tag_col=0)


def test_check_times_validated():
    params = make_params()
    for bad in ([], [0.5, 0.5], [-1.0, 1.0], [1.0, 0.5]):
        with pytest.raises(ValueError):
            tagged_ensemble(params, GEOM, 1, 10, 1.0, bad, tag_y=2,
                            tag_col=0)


def test_fast_stirring_pins_the_tag_less():
    # with rapid swaps the tag wanders around its ring and is rarely found
    # back at the start; with slow swaps it mostly has not moved yet
    params = make_params(gamma2=1.0)
    pts = return_probability_scan(params, GEOM, [0.25, 64.0], 31, 1500,
                                  1.0, tag_y=2, tag_col=1)
    assert pts[0].gamma1 == 0.25
    assert pts[0].alive == 1.0 and pts[1].alive == 1.0
    assert pts[0].at_start > pts[1].at_start + 5 * (pts[0].stderr
                                                    + pts[1].stderr)
