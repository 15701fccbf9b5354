from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as sla

from entropix import finite, fock
from entropix.chain import Interval, preset


def test_two_site_spectrum():
    H, _, _, V = fock.spin_hamiltonians(preset("constant"), Interval(0, 1))
    np.testing.assert_allclose(np.linalg.eigvalsh(H), [-1, 0, 0, 1], atol=1e-14)
    np.testing.assert_array_equal(H, V)


def test_single_left_site_field():
    spec = preset("tabulated", window=[(0, 1.0, 0.8)])
    _, H_l, _, _ = fock.spin_hamiltonians(spec, Interval(0, 1))
    w = np.unique(np.round(np.linalg.eigvalsh(H_l), 12))
    np.testing.assert_allclose(w, [-0.4, 0.4])


def test_size_cap():
    with pytest.raises(ValueError):
        fock.jw_fermions(fock.MAX_SITES + 1)
    with pytest.raises(ValueError):
        fock.spin_hamiltonians(preset("constant"), Interval.of_size(13))


def test_single_site_annihilator():
    (a,) = fock.jw_fermions(1)
    np.testing.assert_array_equal(a.toarray(), [[0, 1], [0, 0]])


@pytest.mark.parametrize("N", [2, 3, 4])
def test_car(N):
    a = [x.toarray() for x in fock.jw_fermions(N)]
    dim = 2**N
    for x in range(N):
        for y in range(N):
            anti = a[x] @ a[y].conj().T + a[y].conj().T @ a[x]
            np.testing.assert_allclose(anti, np.eye(dim) * (x == y), atol=1e-13)
            np.testing.assert_allclose(a[x] @ a[y] + a[y] @ a[x], 0, atol=1e-13)


def test_strings_square_to_identity():
    N = 4
    for x in range(N):
        n = fock.second_quantize(fock.jw_fermions(N), np.diag(np.eye(N)[x]))
        S = np.eye(2**N) - 2 * n
        np.testing.assert_allclose(S @ S, np.eye(2**N), atol=1e-14)


def test_number_operator_spectrum():
    a = fock.jw_fermions(4)
    n = fock.second_quantize(a, np.eye(4))
    assert sorted(set(np.round(np.diag(n)).astype(int))) == [0, 1, 2, 3, 4]


def test_trace_gamma_identity():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = 0.5 * (B + B.conj().T)
    dG = fock.second_quantize(fock.jw_fermions(4), A)
    lhs = np.trace(sla.expm(dG))
    rhs = np.linalg.det(np.eye(4) + sla.expm(A))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("name", ["constant", "step_J", "periodic2"])
@pytest.mark.parametrize("N", [4, 6])
def test_jw_consistency(name, N):
    spec = preset(name, **({"lam": 0.4} if name != "periodic2" else {"lam": (0.2, -0.3)}))
    iv = Interval.of_size(N)
    H, H_l, H_r, V = fock.spin_hamiltonians(spec, iv)
    sys = finite.assemble(spec, iv)
    a = fock.jw_fermions(N)
    offset = 0.5 * np.sum(np.diag(sys.h))
    I = np.eye(2**N)
    np.testing.assert_allclose(H, fock.second_quantize(a, sys.h) - offset * I, atol=1e-13)
    np.testing.assert_allclose(V, fock.second_quantize(a, sys.v), atol=1e-13)
    np.testing.assert_allclose(H_l + H_r + V, H, atol=0)
    fs = fock.FockSystem.build(spec, iv)
    np.testing.assert_allclose(fs.flux_l, fock.second_quantize(a, sys.phi_l), atol=1e-13)
    np.testing.assert_allclose(fs.flux_r, fock.second_quantize(a, sys.phi_r), atol=1e-13)
    sigma_dgamma = fock.second_quantize(a, -spec.beta_l * sys.phi_l - spec.beta_r * sys.phi_r)
    np.testing.assert_allclose(fs.sigma, sigma_dgamma, atol=1e-13)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(H)), np.sort(np.linalg.eigvalsh(fock.second_quantize(a, sys.h) - offset * I)), atol=1e-12)


@pytest.mark.parametrize("name", ["constant", "step_J", "periodic2"])
def test_pauli_flux_polynomial(name):
    spec = preset(name, **({"lam": 0.4} if name != "periodic2" else {}))
    iv = Interval(-2, 3)
    fs = fock.FockSystem.build(spec, iv)
    phi_l, phi_r = fock.pauli_flux_observables(spec, iv)
    np.testing.assert_allclose(phi_l, fs.flux_l, atol=1e-14)
    np.testing.assert_allclose(phi_r, fs.flux_r, atol=1e-14)
    np.testing.assert_allclose(fs.flux_l, 1j * (fs.H_l @ fs.V - fs.V @ fs.H_l), atol=0)


def test_density_matrix(constant):
    iv = Interval.of_size(5)
    omega = fock.density_matrix(constant, iv)
    assert np.trace(omega) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(omega).min() > 0
    fs = fock.FockSystem.build(constant, iv)
    for A in (fs.H_l, fs.H_r):
        assert np.abs(omega @ A - A @ omega).max() < 1e-13
    hot = fock.density_matrix(preset("constant", beta_l=1e-6, beta_r=1e-6), iv)
    np.testing.assert_allclose(hot, np.eye(32) / 32, atol=1e-5)


def test_fcs_distribution_properties(constant):
    fs = fock.FockSystem.build(constant, Interval.of_size(6))
    t = 2.0
    meas = fock.fcs_distribution(fs, t=t)
    assert meas.total == pytest.approx(1.0, abs=1e-12)
    assert np.all(meas.weights >= fock.PRUNE_WEIGHT)
    assert meas.log_mgf(0.0, t) == pytest.approx(0.0, abs=1e-13)
    for phi, w in meas.atoms:
        assert meas.weight_at(-phi) == pytest.approx(math.exp(-t * phi) * w, abs=1e-10)
    sys = finite.assemble(constant, Interval.of_size(6))
    rng = np.random.default_rng(3)
    alphas = rng.uniform(-0.3, 1.3, 20) + 1j * rng.uniform(-1, 1, 20)
    for a in alphas:
        assert abs(np.exp(meas.log_mgf(a, t)) - finite.fcs_char(sys, a, t)) < 1e-9
    with pytest.raises(ValueError):
        fock.fcs_distribution(fs, t=0.0)


def test_sigma_spectral_measure(step_J):
    iv = Interval.of_size(6)
    fs = fock.FockSystem.build(step_J, iv)
    sys = finite.assemble(step_J, iv)
    t = 1.5
    init = fock.sigma_spectral_measure(fs, t=t)
    assert init.mean >= 0
    assert init.log_mgf(0.4, t).real == pytest.approx(finite.es_t(sys, 0.4, t), abs=1e-9)
    relaxed = fock.sigma_spectral_measure(fs, t=t, s=1.0)
    assert relaxed.log_mgf(0.4, t).real == pytest.approx(finite.gc_t(sys, 0.4, t, 1.0), abs=1e-9)
    values = np.sort(fs.sigma_t_eig(t).values)
    np.testing.assert_allclose(values, -values[::-1], atol=1e-10)
    broken = max(abs(init.weight_at(-phi) - math.exp(-t * phi) * w) for phi, w in init.atoms)
    assert broken > 1e-6


def test_relative_entropy():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = B @ B.conj().T
    rho /= np.trace(rho).real
    assert fock.relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-12)
    C = rng.normal(size=(6, 6))
    nu = C @ C.T
    nu /= np.trace(nu)
    assert fock.relative_entropy(rho, nu) < 0
    pure = np.zeros((6, 6))
    pure[0, 0] = 1.0
    other = np.zeros((6, 6))
    other[1, 1] = 1.0
    assert fock.relative_entropy(pure, other) == -math.inf


def test_relative_entropy_vs_mean_rate(constant):
    iv = Interval.of_size(6)
    fs = fock.FockSystem.build(constant, iv)
    t = 1.5
    rel = fock.relative_entropy(fs.evolved_state(t), fs.omega)
    assert rel <= 0
    assert rel == pytest.approx(-t * finite.mean_ep_rate(finite.assemble(constant, iv), t), abs=1e-9)


def test_time_reversal_is_conjugation(step_J):
    fs = fock.FockSystem.build(step_J, Interval.of_size(5))
    np.testing.assert_array_equal(fs.theta(fs.H), fs.H)
    t = 0.9
    # Theta tau^t Theta = tau^{-t}; the flux is odd
    np.testing.assert_allclose(fs.theta(fs.U(t)), fs.U(-t), atol=1e-13)
    np.testing.assert_allclose(fs.theta(fs.sigma), -fs.sigma, atol=1e-15)


def test_cluster_values():
    labels, reps = fock.cluster_values(np.array([0.0, 1e-12, 1.0, 1.0 + 5e-11, 3.0]))
    assert labels.tolist() == [0, 0, 1, 1, 2]
    np.testing.assert_allclose(reps, [5e-13, 1.0 + 2.5e-11, 3.0])


def test_discrete_measure_validation():
    with pytest.raises(ValueError):
        fock.DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.2]))
    m = fock.DiscreteMeasure.from_atoms([0.0, 1e-12, 2.0, 5.0], [0.5, 0.3, 0.2 - 1e-18, 1e-18])
    assert len(m.atoms) == 2
    assert m.pruned_mass == 1e-18
