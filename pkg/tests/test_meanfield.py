import math
import warnings

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, linalg, stats

from swarmkin import meanfield as mf
from swarmkin.core import ModelParams, ParameterError


def P(g, b, n):
    return ModelParams(g, b, n, dt=1e-3)


def test_potential_values(small_noise):
    assert mf.potential(0.0, small_noise) == pytest.approx(-5.0 * math.log(1.3), rel=1e-14)
    u = np.random.default_rng(0).uniform(-1, 1, 50)
    assert np.allclose(mf.potential(u, small_noise), mf.potential(-u, small_noise))
    with pytest.raises(ParameterError, match="b=0"):
        mf.potential(0.0, P(0.3, 0.0, 20))


def test_potential_argmin(small_noise):
    prof = mf.potential_profile(small_noise)
    inner = np.abs(prof.u) < 1
    u_min = abs(prof.u[inner][np.argmin(prof.phi[inner])])
    assert u_min == pytest.approx(0.894, abs=1e-3)


def test_curvature_values():
    assert mf.curvature_at_zero(P(0.3, 1.0, 20)) == pytest.approx(20 / 1.69 * (0.25**2 - 1.05**2), rel=1e-14)
    assert mf.curvature_at_zero(P(1.1, 1.0, 20)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.integers(2, 200))
def test_curvature_sign_matches_regime(g, b, n):
    p = P(g, b, n)
    c = mf.curvature_at_zero(p)
    if abs(g / b - (1 + 2 / n)) < 1e-9:
        return
    assert (c < 0) == (mf.regime(p) == mf.SMALL_NOISE)


@pytest.mark.parametrize("g,n", [(0.3, 20), (0.8, 7), (1.3, 20), (0.1, 50)])
def test_analytic_second_derivative_against_finite_differences(g, n):
    p = P(g, 1.0, n)
    for u0 in (0.0, 0.37, -0.6):
        errs = []
        for h in (1e-2, 5e-3):
            fd = (mf.potential(u0 + h, p) - 2 * mf.potential(u0, p) + mf.potential(u0 - h, p)) / h**2
            errs.append(abs(fd - mf.potential_second_derivative(u0, p)))
        assert errs[1] < errs[0] / 3.0 or errs[1] < 1e-7
    assert mf.potential_second_derivative(0.0, p) == pytest.approx(mf.curvature_at_zero(p), rel=1e-12)


def test_ordered_state():
    assert mf.ordered_state(P(0.3, 1.0, 20)) == pytest.approx(math.sqrt(0.8))
    assert mf.ordered_state(P(1.1, 1.0, 20)) == pytest.approx(0.0, abs=1e-7)
    assert mf.ordered_state(P(1.3, 1.0, 20)) is None
    with pytest.warns(UserWarning, match="u_s"):
        us = mf.ordered_state(P(0.3, 1.0, 4))
    assert us == pytest.approx(math.sqrt(1.2))


def test_stationary_density_properties():
    for g in (0.3, 1.3):
        d = mf.stationary_density(P(g, 1.0, 20))
        assert integrate.trapezoid(d.density, d.u) == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(d.density, d.density[::-1])
    big = mf.stationary_density(P(1.3, 1.0, 20))
    assert big.u[np.argmax(big.density)] == pytest.approx(0.0, abs=1e-12)
    small = mf.stationary_density(P(0.3, 1.0, 20))
    assert abs(abs(small.u[np.argmax(small.density)]) - math.sqrt(0.8)) <= small.u[1] - small.u[0]


def test_kramers_formula_by_hand(small_noise):
    p = small_noise
    us = math.sqrt(0.8)
    c0 = mf.curvature_at_zero(p)
    cs = mf.potential_second_derivative(-us, p)
    expected = 20 * math.pi / 1.3 * math.exp(mf.potential(0.0, p) - mf.potential(-us, p)) / math.sqrt(-c0 * cs)
    assert mf.kramers_time(p) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ParameterError):
        mf.kramers_time(P(1.3, 1.0, 20))


def test_kramers_small_n_warns_and_uses_constrained_minimum():
    with pytest.warns(UserWarning):
        tau = mf.kramers_time(P(0.3, 1.0, 4))
    assert math.isfinite(tau) and tau > 0


def test_asymptotic_form_converges():
    ratios = [mf.kramers_time(P(0.3, 1.0, n)) / mf.kramers_time_asymptotic(P(0.3, 1.0, n)) for n in (20, 100, 400, 1000)]
    gaps = [abs(r - 1) for r in ratios]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 5e-3


def test_log_kramers_slope_matches_exponent():
    ns = np.array([20, 30, 40, 50, 60])
    ln_tau = [math.log(mf.kramers_time(P(0.3, 1.0, int(n)))) for n in ns]
    slope = np.polyfit(ns, ln_tau, 1)[0]
    assert slope == pytest.approx(mf.asymptotic_exponent(P(0.3, 1.0, 20)), rel=0.05)


def test_kramers_time_scales_inversely_with_gamma0():
    # Phi depends on gamma0/b only, so tau(N, g, g*bb) = tau(N, 1, bb) / g
    for g in (0.2, 0.5, 2.0):
        assert mf.kramers_time(P(0.3 * g, g, 20)) * g == pytest.approx(mf.kramers_time(P(0.3, 1.0, 20)), rel=1e-12)


def test_generator_rows_sum_to_zero(small_noise):
    L = mf.generator_matrix(small_noise).toarray()
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("g,n", [(0.3, 5), (0.3, 6), (0.3, 20), (1.3, 21), (0.05, 40)])
def test_stationary_law_against_null_space(g, n):
    p = P(g, 1.0, n)
    pi = mf.master_equation_stationary(p)
    L = mf.generator_matrix(p).toarray()
    ns = linalg.null_space(L.T)[:, 0]
    ns = ns / ns.sum()
    assert np.allclose(pi, ns, atol=1e-10)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pi >= 0) and np.array_equal(pi, pi[::-1])
    up, down = mf.chain_rates(p)
    resid = np.abs(pi[:-1] * up[:-1] - pi[1:] * down[1:])
    assert resid.max() <= 1e-10


def test_stationary_law_without_alignment_is_binomial():
    n = 15
    pi = mf.master_equation_stationary(ModelParams(0.7, 0.0, n))
    assert np.allclose(pi, stats.binom.pmf(np.arange(n + 1), n, 0.5), atol=1e-14)


def test_mfpt_three_state_chain_symbolic():
    # N = 2, b = 0, gamma0 = 1: rates up (2-r), down r
    t0, t1 = sympy.symbols("t0 t1")
    sol = sympy.solve([sympy.Eq(2 * t0, 1 + 2 * t1), sympy.Eq(2 * t1, 1 + t0)], [t0, t1])
    assert mf.master_equation_mfpt(ModelParams(1.0, 0.0, 2), 0, 2) == pytest.approx(float(sol[t0]), rel=1e-14)
    assert float(sol[t0]) == 2.0


def test_mfpt_against_dense_solve(small_noise):
    p = small_noise
    L = mf.generator_matrix(p).toarray()
    target = 18
    keep = [r for r in range(p.n_agents + 1) if r != target]
    A = L[np.ix_(keep, keep)]
    T = np.linalg.solve(A, -np.ones(len(keep)))
    assert mf.master_equation_mfpt(p, 2, target) == pytest.approx(T[keep.index(2)], rel=1e-9)
    assert mf.master_equation_mfpt(p, 18, 2) == pytest.approx(mf.master_equation_mfpt(p, 2, 18), rel=1e-12)
    assert mf.master_equation_mfpt(p, 4, 4) == 0.0


def test_mfpt_errors():
    with pytest.raises(ParameterError):
        mf.master_equation_mfpt(ModelParams(0.0, 0.0, 4), 0, 4)
    with pytest.raises(ValueError):
        mf.master_equation_mfpt(ModelParams(0.3, 1.0, 4), 0, 9)


def test_exact_passage_time_is_same_order_as_kramers(small_noise):
    r0, r1 = mf.nearest_lattice_state(-0.9, 20), mf.nearest_lattice_state(0.9, 20)
    assert (r0, r1) == (1, 19)
    tau = mf.master_equation_mfpt(small_noise, r0, r1)
    assert 0.5 < tau / mf.kramers_time(small_noise) < 2.0


def test_bin_masses_sum_to_one(small_noise):
    c, m = mf.lattice_bin_masses(small_noise)
    assert m.sum() == pytest.approx(1.0) and np.allclose(m, m[::-1], rtol=1e-8)
