"""Vectorization, Lindblad construction, and Davies generator oracles.

The worked examples here are hand-computable (amplitude damping, Pauli
commutators) or verified against extended-precision evaluation (Ohmic rate
function via mpmath), so they pin the conventions: column stacking for vec,
zero Lamb shift, and Bohr-frequency grouping that keeps degenerate pairs in
one jump operator.
"""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steadyprep.superop import (HamiltonianSpec, SpectralDensity,
                                assert_density_matrix, bohr_frequencies,
                                build_lindbladian, davies_generator,
                                davies_parts, devectorize, gibbs_state,
                                ohmic_gamma, vectorize)
from steadyprep.spectral import steady_state
from steadyprep.evolve import trace_norm_distance

from conftest import SM, SX, SY, SZ, random_density, random_hermitian


def test_vectorize_column_stacking():
    rho = np.eye(2) / 2
    np.testing.assert_allclose(vectorize(rho), [0.5, 0, 0, 0.5])
    # off-diagonal placement distinguishes column from row stacking
    rho = np.array([[0.0, 1.0], [2.0, 0.0]])
    np.testing.assert_allclose(vectorize(rho), [0, 2, 1, 0])


def test_vectorize_roundtrip(rng):
    rho = random_density(rng, 5)
    np.testing.assert_allclose(devectorize(vectorize(rho)), rho)


def test_vectorize_sandwich_identity(rng):
    """vec(A rho B) = (B^T (x) A) vec(rho) for random 2x2 matrices."""
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = random_density(rng, 2)
    lhs = vectorize(A @ rho @ B)
    rhs = np.kron(B.T, A) @ vectorize(rho)
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_lindblad_amplitude_damping():
    L = build_lindbladian(np.zeros((2, 2)), [SM])
    out = devectorize(L @ vectorize(np.diag([0.0, 1.0]).astype(complex)))
    np.testing.assert_allclose(out, np.diag([1.0, -1.0]), atol=1e-14)


def test_lindblad_coherent_part():
    L = build_lindbladian(SZ)
    out = devectorize(L @ vectorize(SX))
    np.testing.assert_allclose(out, 2 * SY, atol=1e-14)


def test_lindblad_trace_annihilation(rng):
    for _ in range(20):
        d = int(rng.integers(2, 6))
        H = random_hermitian(rng, d)
        jumps = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
                 for _ in range(2)]
        L = build_lindbladian(H, jumps)
        rho = random_density(rng, d)
        out = devectorize(L @ vectorize(rho))
        assert abs(np.trace(out)) <= 1e-12 * max(1.0, L.norm())


def test_lindblad_hermiticity_preservation(rng):
    for _ in range(20):
        d = int(rng.integers(2, 6))
        L = build_lindbladian(random_hermitian(rng, d),
                              [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))])
        rho = random_density(rng, d)
        out = devectorize(L @ vectorize(rho))
        assert np.linalg.norm(out - out.conj().T, np.inf) <= 1e-10 * max(1.0, L.norm())


def test_ohmic_gamma_reference_value():
    got = ohmic_gamma(1.0, g=1.0, beta=1.0)
    with mpmath.workdps(40):
        want = float(2 * mpmath.pi / (1 - mpmath.e ** -1))
    assert got == pytest.approx(want, rel=1e-14)
    assert got == pytest.approx(9.9398528, rel=1e-7)


def test_ohmic_gamma_zero_frequency_limit():
    for g, beta in [(1.0, 1.0), (0.3, 7.5), (2.0, 0.2)]:
        want = 2 * math.pi * g * g / beta
        assert ohmic_gamma(0.0, g, beta) == pytest.approx(want, rel=1e-12)
        # continuity: tiny omega agrees with the limit
        assert ohmic_gamma(1e-9, g, beta) == pytest.approx(want, rel=1e-6)


def test_ohmic_gamma_vectorized_matches_scalar():
    om = np.array([-2.0, -1e-12, 0.0, 1e-12, 0.5, 3.0])
    vec = ohmic_gamma(om, g=0.7, beta=2.5)
    scal = [ohmic_gamma(float(w), g=0.7, beta=2.5) for w in om]
    np.testing.assert_allclose(vec, scal, rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(omega=st.floats(1e-3, 20.0), beta=st.floats(1e-2, 50.0),
       g=st.floats(0.05, 3.0))
def test_ohmic_gamma_kms(omega, beta, g):
    """Detailed balance gamma(-w) = exp(-beta w) gamma(w), relative 1e-12.

    Below ~1e-290 the comparison is absolute: subnormal floats cannot hold
    twelve digits, so a relative check there would test the FPU, not the rate
    function.
    """
    lhs = ohmic_gamma(-omega, g, beta)
    rhs = math.exp(-beta * omega) * ohmic_gamma(omega, g, beta)
    if rhs < 1e-290:
        assert abs(lhs - rhs) <= 1e-290
    else:
        assert abs(lhs - rhs) <= 1e-12 * rhs


def test_spectral_density_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SpectralDensity(g=1.0, beta=0.0)
    with pytest.raises(ValueError):
        SpectralDensity(g=-1.0, beta=1.0)


def test_hamiltonian_spec_sorted_orthonormal(rng):
    H = random_hermitian(rng, 6)
    spec = HamiltonianSpec.from_matrix(H)
    assert np.all(np.diff(spec.energies) >= 0)
    np.testing.assert_allclose(spec.vectors.conj().T @ spec.vectors,
                               np.eye(6), atol=1e-12)
    recon = spec.vectors @ np.diag(spec.energies) @ spec.vectors.conj().T
    np.testing.assert_allclose(recon, H, atol=1e-12)


def test_bohr_frequencies_qubit():
    delta = 0.8
    spec = HamiltonianSpec.from_matrix(np.diag([0.0, delta]))
    omegas, group = bohr_frequencies(spec)
    np.testing.assert_allclose(sorted(omegas), [-delta, 0.0, delta])
    # group indices route each (row, col) entry to E_col - E_row
    for m in range(2):
        for l in range(2):
            assert omegas[group[m, l]] == pytest.approx(
                spec.energies[l] - spec.energies[m], abs=1e-12)


def test_bohr_frequencies_accidental_degeneracy():
    """Energies (0, 2, 3, 4, 4): the equal pair joins the w=0 group."""
    spec = HamiltonianSpec.from_matrix(np.diag([0.0, 4.0, 2.0, 3.0, 4.0]))
    omegas, group = bohr_frequencies(spec)
    np.testing.assert_allclose(np.sort(spec.energies), [0, 2, 3, 4, 4])
    zero_idx = int(np.argmin(np.abs(omegas)))
    assert omegas[zero_idx] == pytest.approx(0.0, abs=1e-12)
    # the two E=4 levels sit at positions 3 and 4 after sorting
    assert group[3, 4] == zero_idx and group[4, 3] == zero_idx


def test_bohr_frequencies_harmonic_grouping():
    spec = HamiltonianSpec.from_matrix(np.diag([0.0, 1.0, 2.0]))
    omegas, group = bohr_frequencies(spec)
    np.testing.assert_allclose(sorted(omegas), [-2, -1, 0, 1, 2])
    # both nearest-neighbor pairs share the w = 1 jump operator
    assert group[0, 1] == group[1, 2]


def test_gibbs_state_qubit_population():
    rho = gibbs_state(np.diag([0.0, 1.0]), beta=1.0)
    assert rho[0, 0].real == pytest.approx(1 / (1 + math.exp(-1)), rel=1e-12)
    assert rho[1, 1].real == pytest.approx(math.exp(-1) / (1 + math.exp(-1)), rel=1e-12)


def test_gibbs_state_extreme_beta_underflow():
    rho = gibbs_state(np.diag([0.0, 1.0, 3.0]), beta=2000.0)
    np.testing.assert_allclose(rho, np.diag([1.0, 0.0, 0.0]), atol=1e-300)
    assert np.trace(rho).real == pytest.approx(1.0)


def test_davies_fixes_gibbs_random_models(rng):
    """Random-model Davies generators relax to the Gibbs state (TND <= 1e-8)."""
    betas = [0.1, 1.0, 10.0]
    for k in range(30):
        d = int(rng.integers(2, 9))
        H = random_hermitian(rng, d)
        A = random_hermitian(rng, d)
        beta = betas[k % 3]
        sd = SpectralDensity(g=0.5, beta=beta)
        spec = HamiltonianSpec.from_matrix(H)
        L = davies_generator(spec, A, sd)
        rho_ss = steady_state(L)
        assert trace_norm_distance(rho_ss, gibbs_state(spec, beta)) <= 1e-8


def test_davies_hermiticity_and_trace(rng):
    spec = HamiltonianSpec.from_matrix(random_hermitian(rng, 5))
    L = davies_generator(spec, random_hermitian(rng, 5), SpectralDensity(1.0, 1.0))
    rho = random_density(rng, 5)
    out = devectorize(L @ vectorize(rho))
    assert np.linalg.norm(out - out.conj().T, np.inf) <= 1e-10 * L.norm()
    assert abs(np.trace(out)) <= 1e-12 * L.norm()


def test_davies_parts_match_full_generator(rng):
    """The cached energy-basis application equals the dense superoperator."""
    spec = HamiltonianSpec.from_matrix(random_hermitian(rng, 4))
    A = random_hermitian(rng, 4)
    sd = SpectralDensity(g=0.8, beta=2.0)
    parts = davies_parts(spec, A, sd)
    L = davies_generator(spec, A, sd)
    rho = random_density(rng, 4)
    np.testing.assert_allclose(parts.apply(rho),
                               devectorize(L @ vectorize(rho)), atol=1e-11)


def test_davies_dephasing_fixes_diagonal_ensembles():
    """[A, H] = 0 gives pure dephasing: every H-diagonal state is stationary."""
    spec = HamiltonianSpec.from_matrix(np.diag([0.0, 1.0, 2.5]))
    A = np.diag([1.0, -0.3, 0.7])
    L = davies_generator(spec, A, SpectralDensity(1.0, 1.0))
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert np.linalg.norm(L @ vectorize(rho)) <= 1e-12 * L.norm()


def test_davies_rejects_non_hermitian_coupling(rng):
    spec = HamiltonianSpec.from_matrix(np.diag([0.0, 1.0]))
    with pytest.raises(ValueError):
        davies_parts(spec, np.array([[0, 1], [0, 0]], dtype=complex),
                     SpectralDensity(1.0, 1.0))


def test_assert_density_matrix_rejects_bad_inputs():
    assert_density_matrix(np.eye(2) / 2)
    with pytest.raises(AssertionError):
        assert_density_matrix(np.diag([0.7, 0.7]))
    with pytest.raises(AssertionError):
        assert_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(AssertionError):
        assert_density_matrix(np.array([[0.5, 0.2], [0.3, 0.5]]))
