from __future__ import annotations

import math

import numpy as np
import pytest

from entropix import asymptotics as A
from entropix.chain import ChainSpec, TailModel, preset

P_GRID = (0.5, 1.0, 2.0, 4.0, math.inf)
SYM_ALPHAS = (-1.0, 0.2, 0.5, 0.8, 2.0)


@pytest.fixture(scope="module")
def disjoint():
    return ChainSpec(TailModel.constant(1.0, 0.0), TailModel.constant(1.0, 5.0), 1.0, 2.0)


@pytest.fixture(scope="module")
def equilibrium():
    return preset("step_J", beta_l=1.0, beta_r=1.0)


def _hpd(K):
    return np.allclose(K, K.conj().T, atol=1e-13) and np.linalg.eigvalsh(K).min() > 0


def test_k_matrices_alpha_zero(step_J):
    for p in P_GRID:
        k = A.k_matrices(0.4, 0.0, p, step_J)
        np.testing.assert_allclose(k.K_alpha, k.K_0, atol=1e-14)
        np.testing.assert_allclose(k.K_alpha_p, k.K_0, atol=1e-14)
        np.testing.assert_allclose(k.K_0, np.diag(np.exp(np.diag(k.k0))), atol=1e-15)


def test_k_matrices_equal_betas(equilibrium):
    k = A.k_matrices(0.4, 0.7, 2.0, equilibrium)
    np.testing.assert_allclose(k.K_alpha, k.K_0, atol=1e-13)


def test_k_matrices_reflectionless_point(constant):
    for p in P_GRID:
        k = A.k_matrices(0.7, 0.3, p, constant)
        np.testing.assert_allclose(k.K_alpha_p, k.K_alpha, atol=1e-12)


def test_k_matrices_large_p_limit(step_J):
    k = A.k_matrices(0.4, 0.3, 2.0**10, step_J)
    np.testing.assert_allclose(k.K_alpha_p, k.K_alpha_inf, atol=1e-6)
    for K in (k.K_0, k.K_alpha, k.K_alpha_p, k.K_alpha_inf):
        assert _hpd(K)


@pytest.mark.parametrize("alpha", [-0.5, 0.3, 1.2])
def test_swap_freedom(step_J, alpha):
    assert A.e_plus(alpha, step_J, swap=True) == pytest.approx(A.e_plus(alpha, step_J), abs=1e-10)
    for p in (0.5, 2.0, math.inf):
        assert A.e_p_plus(alpha, p, step_J, swap=True) == pytest.approx(A.e_p_plus(alpha, p, step_J), abs=1e-10)


@pytest.mark.parametrize("name", ["constant", "step_J"])
def test_p_symmetry_suite(name):
    spec = preset(name)
    for p in P_GRID:
        for a in SYM_ALPHAS:
            assert A.e_p_plus(a, p, spec) == pytest.approx(A.e_p_plus(1 - a, p, spec), abs=1e-9)
        assert abs(A.e_p_plus(1.0, p, spec)) < 1e-8
        assert A.e_p_plus(0.0, p, spec) == 0.0


def test_es_symmetry_iff_reflectionless(constant, step_J):
    for a in SYM_ALPHAS:
        assert A.e_plus(a, constant) == pytest.approx(A.e_plus(1 - a, constant), abs=1e-9)
    assert abs(A.e_plus(0.2, step_J) - A.e_plus(0.8, step_J)) > 1e-6


def test_p_monotone(step_J, constant):
    vals = [A.e_p_plus(0.5, p, step_J) for p in P_GRID]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    const = [A.e_p_plus(0.5, p, constant) for p in P_GRID]
    assert max(const) - min(const) < 1e-10
    assert const[2] == pytest.approx(A.e_plus(0.5, constant), abs=1e-10)
    for a in (-0.5, 0.3, 1.5):
        e_inf = A.e_p_plus(a, math.inf, step_J)
        for p in P_GRID[:-1]:
            assert e_inf <= A.e_p_plus(a, p, step_J) + 1e-12


@pytest.mark.parametrize("name", ["constant", "step_J"])
def test_strict_convexity(name):
    spec = preset(name)
    alphas = np.linspace(-1.0, 2.0, 21)
    for f in (lambda a: A.e_plus(a, spec), lambda a: A.e_p_plus(a, 0.5, spec), lambda a: A.e_p_plus(a, math.inf, spec)):
        v = np.array([f(a) for a in alphas])
        assert np.all(v[:-2] - 2 * v[1:-1] + v[2:] > 0)


def test_equilibrium_and_empty_support_vanish(equilibrium, disjoint):
    for spec in (equilibrium, disjoint):
        for a in (-0.5, 0.5, 1.5):
            assert abs(A.e_plus(a, spec)) < 1e-12
            assert abs(A.e_p_plus(a, 1.0, spec)) < 1e-12
    assert A.clt_variance(equilibrium) == 0.0
    assert A.landauer_flux(equilibrium)[0] == pytest.approx(0.0, abs=1e-14)


def test_closed_form(constant, step_J):
    for a in (-0.5, 0.25, 0.5, 0.75, 1.5):
        assert A.e_plus_reflectionless(a, constant) == pytest.approx(A.e_plus(a, constant), abs=1e-8)
    assert A.e_plus_reflectionless(0.0, constant) == pytest.approx(0.0, abs=1e-15)
    assert A.e_plus_reflectionless(1.0, constant) == pytest.approx(0.0, abs=1e-15)
    assert A.e_plus_reflectionless(0.3, constant) == pytest.approx(A.e_plus_reflectionless(0.7, constant), abs=1e-14)
    with pytest.raises(ValueError, match="not reflectionless"):
        A.e_plus_reflectionless(0.5, step_J)


def test_identity_report(constant, step_J, disjoint):
    r = A.entropic_identity_report(constant)
    assert r.reflectionless and abs(r.e_plus_at_1) < 1e-8 and r.p_spread_at_half < 1e-8
    assert r.consistent
    r = A.entropic_identity_report(step_J)
    assert not r.reflectionless and r.e_plus_at_1 > 0 and r.p_spread_at_half > 0
    assert r.consistent and r.verdict == "entropic identity fails"
    r = A.entropic_identity_report(disjoint)
    assert r.verdict == "no transport" and r.e_plus_at_1 == 0.0
    assert set(r.to_dict()) >= {"verdict", "consistent", "e_p_at_half"}


def test_landauer_signs(step_J):
    phi, sigma = A.landauer_flux(step_J)
    assert phi > 0 and sigma == pytest.approx(step_J.delta_beta * phi)
    phi_rev, _ = A.landauer_flux(step_J.with_betas(2.0, 1.0))
    assert phi_rev < 0


@pytest.mark.parametrize("name", ["constant", "step_J"])
def test_derivative_at_zero_is_mean_entropy_production(name):
    spec = preset(name)
    _, sigma = A.landauer_flux(spec)
    assert -A.derivative(lambda a: A.e_plus(a, spec)) == pytest.approx(sigma, abs=1e-6)
    for p in (0.5, 2.0, math.inf):
        assert -A.derivative(lambda a: A.e_p_plus(a, p, spec)) == pytest.approx(sigma, abs=1e-6)


def test_clt_variance(step_J):
    D = A.clt_variance(step_J)
    d2 = A.second_derivative(lambda a: A.e_p_plus(a, 2.0, step_J, 1e-14), 0.0, f0=0.0)
    assert D > 0
    assert D == pytest.approx(d2, abs=1e-5)


@pytest.mark.parametrize("name", ["constant", "step_J"])
def test_rate_function_zero_and_domain(name):
    spec = preset(name)
    _, sigma = A.landauer_flux(spec)
    for which in ("ES_GC", "FCS"):
        rf = A.rate_function(which, spec)
        assert abs(rf(sigma)) < 1e-8
        assert rf(0.5 * sigma) > 0
        lo, hi = rf.domain
        assert rf(hi + 1.0) == math.inf
        assert rf(lo - 1.0) == math.inf


def test_fcs_rate_fluctuation_relation(step_J):
    # with I(theta) = -inf(alpha theta + e(alpha)) and e(alpha) = e(1 - alpha)
    # the penalty sits on the negative side: I(-theta) = I(theta) + theta
    _, sigma = A.landauer_flux(step_J)
    rf = A.rate_function("FCS", step_J)
    for f in (0.1, 0.3, 0.7):
        th = f * sigma
        assert rf(-th) - rf(th) == pytest.approx(th, abs=1e-6)


def test_rate_functions_coincide_iff_reflectionless(constant, step_J):
    for spec, differ in ((constant, False), (step_J, True)):
        _, sigma = A.landauer_flux(spec)
        gap = abs(A.rate_function("ES_GC", spec)(-sigma) - A.rate_function("FCS", spec)(-sigma))
        assert (gap > 1e-4) if differ else (gap < 1e-8)


def test_rate_function_rejects_unknown(constant):
    with pytest.raises(ValueError):
        A.rate_function("XX", constant)


def test_finite_time_convergence_shape(constant, equilibrium):
    rows = A.finite_time_convergence(constant, "EP", 0.5, [5.0, 10.0, 20.0])
    assert [r["t"] for r in rows] == [5.0, 10.0, 20.0]
    errs = [r["error"] for r in rows]
    assert errs[-1] < errs[0]
    assert errs[-1] < 5e-2
    es = A.finite_time_convergence(constant, "ES", 0.5, [20.0])[0]
    gc = A.finite_time_convergence(constant, "GC", 0.5, [20.0])[0]
    assert es["limit"] == gc["limit"]
    assert gc["s"] == 20.0 and gc["M"] > es["M"]
    assert abs(es["value"] - gc["value"]) < 5e-2
    eq = A.finite_time_convergence(equilibrium, "ES", 0.5, [5.0, 20.0], M_rule=60)
    # only boundary terms survive at equal temperatures, so ES_t / t decays like 1/t
    assert eq[-1]["M"] == 60
    assert abs(eq[-1]["value"]) < 0.5 * abs(eq[0]["value"])
    assert abs(eq[-1]["value"]) < 5e-3
    with pytest.raises(ValueError):
        A.finite_time_convergence(constant, "XX", 0.5, [1.0])
