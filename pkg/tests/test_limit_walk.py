"""Effective rod walk: reversibility, closed forms, and simulation.

Closed forms are checked two ways: frozen exact rationals for one corner
(alpha = beta = 1, n = 10, kappa = 1, where the normalizer is 1/9, the mean
is the harmonic number H_8, and the modus is log 9), and peak-split
quadrature for random parameter draws.  The quadrature splits the domain at
the modus and factors out the peak height; plain quad on the raw integrand
loses the sharp-peak cases.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rodfluid.limit_walk import continuous_mean, continuous_normalizer, \
    detailed_balance_residual, modus, rw_law, \
    rw_rates, simulate_rw, stationary_measure
from rodfluid.model import Params
from rodfluid.rng import RngStream


def make_params(**kw):
    base = dict(p=0.5, q=1.0, a=0.7, b=1.1, gamma1=0.9, gamma2=1.0,
                kappa=0.8, N=2)
    base.update(kw)
    return Params(**base)


def params_from(alpha, beta, n, kappa):
    # q = 1, p = e^-beta, a = 1, b = e^alpha reproduces any (alpha, beta)
    return make_params(p=math.exp(-beta), q=1.0, a=1.0, b=math.exp(alpha),
                       kappa=kappa, N=n)


def test_frozen_exact_corner():
    # alpha=beta=1, n=10, kappa=1: Z = Gamma(1)Gamma(9)/Gamma(10) = 1/9,
    # mean = psi(9) - psi(1) = H_8 = 761/280, modus = log(10/1 - 1) = log 9
    assert continuous_normalizer(1.0, 1.0, 10) == pytest.approx(1 / 9, rel=1e-14)
    assert continuous_mean(1.0, 1.0, 10) == pytest.approx(761 / 280, rel=1e-14)
    assert modus(1.0, 1.0, 10) == pytest.approx(math.log(9), rel=1e-14)


def test_normalizer_and_mean_against_quadrature():
    rng = np.random.default_rng(42)
    for _ in range(10):
        alpha = float(rng.uniform(0.2, 3.0))
        beta = float(rng.uniform(alpha / 8.0 + 0.05, 4.0))
        n = int(rng.integers(2, 40))
        if not alpha < n * beta:
            continue
        kappa = float(rng.uniform(0.2, 5.0))
        peak = modus(alpha, beta, n, kappa)
        # log weight: -alpha x - n log(1 + kappa e^{-beta x})
        logf = lambda x: -alpha * x - n * np.logaddexp(
            0.0, math.log(kappa) - beta * x)
        lp = logf(peak)
        g = lambda x: math.exp(logf(x) - lp)
        zl, _ = quad(g, -np.inf, peak, limit=400)
        zr, _ = quad(g, peak, np.inf, limit=400)
        z_quad = math.exp(lp) * (zl + zr)
        ml, _ = quad(lambda x: x * g(x), -np.inf, peak, limit=400)
        mr, _ = quad(lambda x: x * g(x), peak, np.inf, limit=400)
        mean_quad = (ml + mr) / (zl + zr)
        assert continuous_normalizer(alpha, beta, n, kappa) == \
            pytest.approx(z_quad, rel=1e-8), (alpha, beta, n, kappa)
        assert continuous_mean(alpha, beta, n, kappa) == \
            pytest.approx(mean_quad, rel=1e-8, abs=1e-10), (alpha, beta, n, kappa)


def test_modus_against_grid_search():
    for n in (10, 100, 10000):
        alpha = beta = 1.0
        kappa = 1.0
        m = modus(alpha, beta, n, kappa)
        logf = lambda x: -alpha * x - n * np.logaddexp(0.0, -beta * x)
        grid = np.arange(m - 0.5, m + 0.5, 1e-4)
        vals = np.array([logf(x) for x in grid])
        assert abs(grid[int(vals.argmax())] - m) < 2e-4, n


def test_detailed_balance_on_random_parameter_sets():
    rng = np.random.default_rng(314)
    heights = np.arange(-100, 100)
    for trial in range(10):
        n = int(rng.integers(2, 8))
        beta = float(rng.uniform(0.1, 2.0))
        alpha = float(rng.uniform(0.05, n * beta * 0.95))
        kappa = float(rng.uniform(0.3, 3.0))
        params = params_from(alpha, beta, n, kappa)
        res = detailed_balance_residual(params, heights)
        assert res < 1e-12, (trial, res)


def test_rates_shape_and_reflection():
    params = make_params()
    y = np.arange(-5, 6)
    up, down = rw_rates(params, y)
    assert up[-1] == 0.0 and down[0] == 0.0
    assert (up[:-1] > 0).all() and (down[1:] > 0).all()
    with pytest.raises(ValueError):
        rw_rates(params, np.array([0, 2, 3]))


def test_escape_regimes_raise():
    # alpha <= 0: rod drifts up; alpha >= N beta: rod melts downward
    up_drift = make_params(a=2.0, b=1.0)
    with pytest.raises(ValueError):
        stationary_measure(up_drift)
    melt = make_params(p=0.9, q=1.0, a=1.0, b=5.0, N=2)
    assert melt.alpha > melt.N * melt.beta
    with pytest.raises(ValueError):
        stationary_measure(melt)
    # explicit windows are exact restrictions, fine either way
    y, m = stationary_measure(melt, np.arange(-10, 11))
    assert m.sum() == pytest.approx(1.0, abs=1e-12)


def test_auto_window_captures_mass():
    params = params_from(1.0, 1.0, 10, 1.0)
    y, m = stationary_measure(params)
    assert m.sum() == pytest.approx(1.0, abs=1e-12)
    assert m[0] < 1e-20 and m[-1] < 1e-20
    # widening the window does not change interior values
    y2, m2 = stationary_measure(params, np.arange(y[0] - 5, y[-1] + 6))
    sl = slice(5, 5 + y.size)
    assert np.allclose(m2[sl], m * m2[sl].sum(), rtol=1e-12, atol=1e-300)


def test_simulate_rw_deterministic_and_consistent():
    params = params_from(1.0, 1.0, 4, 1.0)
    y = np.arange(-6, 10)
    r1 = simulate_rw(params, y, RngStream(11, 0), 50.0, 0,
                     record_trajectory=True)
    r2 = simulate_rw(params, y, RngStream(11, 0), 50.0, 0,
                     record_trajectory=True)
    assert r1.n_events == r2.n_events
    assert np.array_equal(r1.trajectory, r2.trajectory)
    assert r1.occupation.sum() == pytest.approx(r1.t_final, rel=1e-12)
    assert r1.final_height == (r1.trajectory[-1] if r1.n_events else 0)
    with pytest.raises(ValueError):
        simulate_rw(params, y, RngStream(11, 0), 1.0, 99)


def test_occupation_converges_to_stationary_law():
    params = params_from(1.0, 1.0, 3, 1.0)
    yw, m = stationary_measure(params)
    run = simulate_rw(params, yw, RngStream(121, 5), 40000.0, 0)
    emp = run.occupation / run.occupation.sum()
    tv = 0.5 * np.abs(emp - m).sum()
    assert tv < 0.03, tv


def test_rw_law_counts():
    params = params_from(1.0, 1.0, 4, 1.0)
    y = np.arange(-8, 12)
    counts = rw_law(params, y, 999, 400, 2.0, 0, [1.0, 2.0])
    assert counts.shape == (2, y.size)
    assert (counts.sum(axis=1) == 400).all()
    again = rw_law(params, y, 999, 400, 2.0, 0, [1.0, 2.0])
    assert np.array_equal(counts, again)


def test_closed_form_argument_validation():
    with pytest.raises(ValueError):
        continuous_normalizer(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        continuous_normalizer(5.0, 1.0, 5)
    with pytest.raises(ValueError):
        continuous_mean(1.0, -1.0, 5)
    with pytest.raises(ValueError):
        modus(1.0, 1.0, 0)
    with pytest.raises(ValueError):
        continuous_normalizer(1.0, 1.0, 5, kappa=0.0)


def test_mean_tracks_log_n_growth():
    # mean - (1/beta) log n stays bounded (approaches Euler's constant)
    for n in (10, 100, 1000):
        gap = continuous_mean(1.0, 1.0, n) - math.log(n)
        assert abs(gap) <= 2.0
    big = continuous_mean(1.0, 1.0, 10**6) - math.log(10**6)
    assert big == pytest.approx(0.5772156649, abs=1e-2)
