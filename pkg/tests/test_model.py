"""Parameters, geometry, density profile, and initial-state sampling.

The profile oracle is exact rational arithmetic: for rational p, q, kappa
and integer y, rho(y) = kappa (p/q)^y / (1 + kappa (p/q)^y) is a Fraction.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rodfluid.model import FullState, LatticeGeometry, Params, check_state, \
    density_profile, log_vacancy, rod_region, sample_initial
from rodfluid.rng import RngStream


def make_params(**kw):
    base = dict(p=0.5, q=1.0, a=0.7, b=1.1, gamma1=0.9, gamma2=1.0,
                kappa=0.8, N=2)
    base.update(kw)
    return Params(**base)


def rho_exact(p, q, kappa, y):
    r = Fraction(p) / Fraction(q)
    x = Fraction(kappa) * r ** y
    return x / (1 + x)


def test_profile_matches_exact_rationals():
    params = make_params(p=0.25, q=1.0, kappa=2.0)
    for y in range(-30, 31):
        want = rho_exact(Fraction(1, 4), 1, 2, y)
        got = density_profile(params, y)
        assert got == pytest.approx(float(want), rel=1e-14, abs=0), y


def test_profile_extreme_heights_no_overflow():
    params = make_params(p=0.5, q=1.0, kappa=1.0)
    assert density_profile(params, -500) == pytest.approx(1.0, abs=1e-15)
    assert density_profile(params, 500) == pytest.approx(0.0, abs=1e-15)
    lv = log_vacancy(params, -500)
    # 1 - rho(-500) = 1/(1 + 2^500); log of that is about -500 log 2
    assert lv == pytest.approx(-500 * math.log(2), rel=1e-12)


@given(
    p=st.floats(0.05, 0.95), scale=st.floats(1.0, 4.0),
    kappa=st.floats(0.1, 10.0), y=st.integers(-40, 40),
)
@settings(max_examples=200, deadline=None)
def test_profile_matches_rationals_everywhere(p, scale, kappa, y):
    # binary floats are exact rationals, so the oracle is exact arithmetic
    q = p * scale + 0.01
    params = make_params(p=p, q=q, kappa=kappa)
    want = float(rho_exact(Fraction(p), Fraction(q), Fraction(kappa), y))
    assert density_profile(params, y) == pytest.approx(want, rel=1e-12, abs=1e-300)


@given(
    p=st.floats(0.05, 0.95), scale=st.floats(1.0, 4.0),
    kappa=st.floats(0.1, 10.0), y=st.integers(-40, 40),
)
@settings(max_examples=200, deadline=None)
def test_vertical_flux_balance(p, scale, kappa, y):
    # p rho(y) (1 - rho(y+1)) == q rho(y+1) (1 - rho(y)); the vacancies come
    # from log_vacancy because 1 - rho cancels catastrophically near rho = 1
    q = p * scale + 0.01
    params = make_params(p=p, q=q, kappa=kappa)
    lhs = p * density_profile(params, y) * math.exp(log_vacancy(params, y + 1))
    rhs = q * density_profile(params, y + 1) * math.exp(log_vacancy(params, y))
    assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-300)


@given(
    p=st.floats(0.05, 0.95), scale=st.floats(1.0, 4.0),
    kappa=st.floats(0.1, 10.0), y=st.integers(-20, 20),
)
@settings(max_examples=200, deadline=None)
def test_profile_odds_form(p, scale, kappa, y):
    # rho == x/(1+x) with x = kappa (p/q)^y
    q = p * scale + 0.01
    params = make_params(p=p, q=q, kappa=kappa)
    x = kappa * (p / q) ** y
    assert density_profile(params, y) == pytest.approx(x / (1.0 + x), rel=1e-11)


def test_log_vacancy_consistent_with_profile():
    params = make_params(p=0.3, q=0.9, kappa=1.7)
    for y in range(-25, 26):
        # partition of unity, stable on both sides
        assert math.exp(log_vacancy(params, y)) + density_profile(params, y) \
            == pytest.approx(1.0, abs=5e-15)
        # exact-rational oracle for the log itself
        vac = 1 / (1 + rho_exact(Fraction(0.3), Fraction(0.9), Fraction(1.7), y)
                   / (1 - rho_exact(Fraction(0.3), Fraction(0.9), Fraction(1.7), y)))
        assert log_vacancy(params, y) == pytest.approx(
            math.log(float(vac)), rel=1e-11, abs=1e-13)


def test_step_profile_at_p_zero():
    params = make_params(p=0.0, q=1.0, kappa=3.0)
    assert density_profile(params, -1) == 1.0
    assert density_profile(params, 1) == 0.0
    assert density_profile(params, 0) == pytest.approx(0.75)
    assert params.beta == math.inf


def test_profile_accepts_arrays_and_non_integer_heights():
    params = make_params()
    ys = np.array([-2.5, 0.0, 3.25])
    out = density_profile(params, ys)
    assert out.shape == (3,)
    for i, y in enumerate(ys):
        assert out[i] == pytest.approx(density_profile(params, float(y)))


def test_params_validation():
    with pytest.raises(ValueError):
        make_params(p=1.0, q=0.5)     # need p < q
    with pytest.raises(ValueError):
        make_params(p=-0.1)
    with pytest.raises(ValueError):
        make_params(q=math.inf)
    with pytest.raises(ValueError):
        make_params(kappa=0.0)
    with pytest.raises(ValueError):
        make_params(N=1)
    with pytest.raises(ValueError):
        make_params(N=2.5)
    with pytest.raises(ValueError):
        make_params(a=-1.0)


def test_alpha_beta():
    params = make_params(a=1.0, b=math.e)
    assert params.alpha == pytest.approx(1.0)
    assert make_params(p=0.5, q=1.0).beta == pytest.approx(math.log(2))
    assert make_params(a=0.0, b=1.0).alpha == math.inf
    assert make_params(a=1.0, b=0.0).alpha == -math.inf
    with pytest.raises(ValueError):
        _ = make_params(a=0.0, b=0.0).alpha


def test_geometry_rows_and_bounds():
    geom = LatticeGeometry(width=5, vmin=-3, vmax=4)
    assert geom.n_rows == 8
    assert list(geom.heights()) == list(range(-3, 5))
    for y in range(-3, 5):
        assert geom.height_of(geom.row_of(y)) == y
    with pytest.raises(ValueError):
        geom.row_of(5)
    with pytest.raises(ValueError):
        LatticeGeometry(width=1, vmin=-1, vmax=1)
    with pytest.raises(ValueError):
        LatticeGeometry(width=4, vmin=0, vmax=3)
    with pytest.raises(ValueError):
        geom.require_fits(6)


def test_rod_region_sites():
    assert rod_region(3, 4) == [(0, 3), (1, 3), (2, 3), (3, 3)]


def test_sample_initial_rod_sites_empty_and_frequencies():
    params = make_params(kappa=1.0)
    geom = LatticeGeometry(width=40, vmin=-3, vmax=3)
    rng = RngStream(2718, 0)
    n_draws = 400
    totals = np.zeros(geom.n_rows)
    for _ in range(n_draws):
        st_ = sample_initial(params, geom, 0, rng)
        check_state(st_, geom, params.N)
        assert not st_.occ[geom.row_of(0), :params.N].any()
        totals += st_.occ.sum(axis=1)
    probs = density_profile(params, geom.heights())
    for r in range(geom.n_rows):
        ncols = geom.width - (params.N if r == geom.row_of(0) else 0)
        n = n_draws * ncols
        sigma = math.sqrt(n * probs[r] * (1 - probs[r]))
        assert abs(totals[r] - n * probs[r]) < 5 * sigma, r


def test_check_state_rejects_corruption():
    params = make_params()
    geom = LatticeGeometry(width=4, vmin=-1, vmax=2)
    st_ = sample_initial(params, geom, 0, RngStream(1, 0))
    bad = st_.copy()
    bad.occ[geom.row_of(0), 0] = 1
    with pytest.raises(ValueError):
        check_state(bad, geom, params.N)
    bad = st_.copy()
    bad.occ[0, 0] = 7
    with pytest.raises(ValueError):
        check_state(bad, geom, params.N)
    bad = FullState(st_.occ[:-1].copy(), st_.rod_y)
    with pytest.raises(ValueError):
        check_state(bad, geom, params.N)


def test_full_state_helpers():
    occ = np.array([[1, 0, 1], [0, 0, 1]], dtype=np.uint8)
    st_ = FullState(occ, 0)
    assert st_.particle_count() == 3
    assert st_.row_counts().tolist() == [2, 1]
    cp = st_.copy()
    cp.occ[0, 0] = 0
    assert st_.occ[0, 0] == 1
