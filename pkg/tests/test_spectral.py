"""Liouvillian spectra, steady states, and gap definitions.

The qubit Davies generator has a fully analytic spectrum, which pins the
eigenvalue conventions; an extended-precision eigensolve (mpmath) serves as
the oracle for a random model where no closed form exists.
"""
import math

import mpmath
import numpy as np
import pytest
import scipy.linalg

from steadyprep.superop import (HamiltonianSpec, SpectralDensity, ohmic_gamma,
                                build_lindbladian, davies_generator, gibbs_state,
                                vectorize, devectorize, Liouvillian)
from steadyprep.spectral import (DegenerateSteadyStateError, GapReport,
                                 eig_liouvillian, gap_adia, gap_ordering_check,
                                 gap_relax, gap_relevant, rescale_scan,
                                 steady_state)
from steadyprep.evolve import trace_norm_distance
from steadyprep.models import QubitModel, qubit_analytic_spectrum, qubit_schedule

from conftest import SM, SY, random_density, random_hermitian


def qubit_generator(g=1.0, beta=1.0, s=1.0):
    model = QubitModel(g=g, beta=beta)
    return qubit_schedule(model, 1.0).generator_at(s), model


def test_qubit_spectrum_analytic():
    """Four eigenvalues {0, -2G, -G +- i delta} with 2G = gamma(d)(1+e^(-bd))."""
    L, model = qubit_generator(g=1.0, beta=1.0, s=1.0)
    got = np.sort_complex(eig_liouvillian(L).eigenvalues)
    want = np.sort_complex(qubit_analytic_spectrum(model, 1.0))
    np.testing.assert_allclose(got, want, atol=1e-10 * L.norm())


def test_pure_hamiltonian_spectrum_and_degeneracy():
    L = build_lindbladian(np.diag([0.0, 1.0]))
    spec = eig_liouvillian(L)
    got = np.sort_complex(spec.eigenvalues)
    np.testing.assert_allclose(got, [-1j, 0, 0, 1j], atol=1e-12)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(L)


def test_degenerate_blocks_raise():
    """Two uncoupled decaying blocks have a two-dimensional fixed space."""
    jump = np.zeros((4, 4), dtype=complex)
    jump[0, 1] = 1.0
    jump[2, 3] = 1.0
    L = build_lindbladian(np.zeros((4, 4)), [jump])
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(L)


def test_spectrum_against_extended_precision(rng):
    """Random 3-level Davies eigenvalues vs mpmath at 30 significant digits."""
    spec = HamiltonianSpec.from_matrix(random_hermitian(rng, 3))
    L = davies_generator(spec, random_hermitian(rng, 3), SpectralDensity(0.7, 1.3))
    got = eig_liouvillian(L).eigenvalues
    with mpmath.workdps(30):
        M = mpmath.matrix([[mpmath.mpc(z) for z in row] for row in L.matrix])
        ref, _ = mpmath.eig(M)
        ref = np.array([complex(z) for z in ref])
    got = got[np.lexsort((got.imag, got.real))]
    ref = ref[np.lexsort((ref.imag, ref.real))]
    np.testing.assert_allclose(got, ref, atol=1e-9 * L.norm())


def test_spectrum_nonpositive_and_conjugate(rng):
    for _ in range(10):
        d = int(rng.integers(2, 6))
        spec = HamiltonianSpec.from_matrix(random_hermitian(rng, d))
        L = davies_generator(spec, random_hermitian(rng, d),
                             SpectralDensity(0.5, 2.0))
        ev = eig_liouvillian(L).eigenvalues
        assert ev.real.max() <= 1e-9 * L.norm()
        for lam in ev:
            assert np.min(np.abs(ev - np.conj(lam))) <= 1e-9 * L.norm()


def test_steady_state_qubit_gibbs():
    L, model = qubit_generator(g=0.8, beta=1.0, s=1.0)
    rho = steady_state(L)
    H = qubit_schedule(model, 1.0).hamiltonian_at(1.0)
    np.testing.assert_allclose(rho, gibbs_state(H, 1.0), atol=1e-10)


def test_steady_state_amplitude_damping():
    L = build_lindbladian(np.zeros((2, 2)), [SM])
    np.testing.assert_allclose(steady_state(L), np.diag([1.0, 0.0]), atol=1e-12)


def test_steady_state_fixed_under_long_evolution(rng):
    spec = HamiltonianSpec.from_matrix(random_hermitian(rng, 4))
    L = davies_generator(spec, random_hermitian(rng, 4), SpectralDensity(0.6, 0.8))
    rho = steady_state(L)
    gap = gap_relax(L)
    prop = scipy.linalg.expm((10.0 / gap) * L.matrix)
    out = devectorize(prop @ vectorize(rho))
    assert trace_norm_distance(out, rho) <= 1e-8


def test_gap_relax_amplitude_damping():
    """Decay rates {1/2, 1/2, 1}: coherences at half the population rate."""
    L = build_lindbladian(np.zeros((2, 2)), [SM])
    ev = eig_liouvillian(L).eigenvalues
    np.testing.assert_allclose(sorted(-ev.real), [0.0, 0.5, 0.5, 1.0], atol=1e-12)
    assert gap_relax(L) == pytest.approx(0.5, rel=1e-12)


def test_gap_relax_excludes_pure_rotation():
    """A purely imaginary pair does not relax and must not set the gap."""
    block = np.diag([0.0, -1.0, -1j * 3.0, 1j * 3.0])
    L = Liouvillian(matrix=block, dim=2)
    assert gap_relax(L) == pytest.approx(1.0, rel=1e-12)


def test_gap_adia_report_fields():
    model = QubitModel(g=0.5, beta=1.0)
    sched = qubit_schedule(model, 1.0)
    report = gap_adia(sched, s_grid=41)
    assert isinstance(report, GapReport)
    assert 0.0 < report.delta_adia <= report.delta_relax + 1e-9
    assert 0.0 <= report.argmin_s_adia <= 1.0
    assert report.delta_relevant is not None
    assert report.delta_adia <= report.delta_relevant + 1e-9
    # flat JSON round-trips with the five documented keys
    import json
    payload = json.loads(report.to_json())
    assert set(payload) == {"delta_adia", "delta_relax", "delta_relevant",
                            "argmin_s_adia", "sigma1_final"}


def test_gap_relevant_tracks_coherence_branch():
    """For the qubit the relevant branch is |1><0|: modulus sqrt(G^2 + d^2)."""
    model = QubitModel(g=0.3, beta=1.0)
    sched = qubit_schedule(model, 1.0)
    got = gap_relevant(sched, s_grid=101)
    from steadyprep.models import delta_relevant_analytic
    assert got == pytest.approx(delta_relevant_analytic(model), rel=1e-6)


def test_gap_ordering_check_cases():
    ok, info = gap_ordering_check(GapReport(
        delta_adia=0.4, delta_relax=0.5, delta_relevant=None,
        argmin_s_adia=0.5, sigma1_final=0.0))
    assert ok and info["premise_real_branch"] and info["ordering_holds"]
    # oscillating slowest mode: no constraint even if the ordering flips
    ok, info = gap_ordering_check(GapReport(
        delta_adia=0.9, delta_relax=0.5, delta_relevant=None,
        argmin_s_adia=0.5, sigma1_final=0.3))
    assert ok and not info["premise_real_branch"]
    # real slowest mode with inverted ordering is a genuine violation
    ok, _ = gap_ordering_check(GapReport(
        delta_adia=0.9, delta_relax=0.5, delta_relevant=None,
        argmin_s_adia=0.5, sigma1_final=0.0))
    assert not ok


def _qubit_parts(g, beta, s):
    """Coherent and dissipative superoperator pieces of the qubit generator."""
    model = QubitModel(g=g, beta=beta)
    sched = qubit_schedule(model, 1.0)
    spec = sched.hamiltonian_at(s)
    K = build_lindbladian(spec.matrix).matrix
    D = sched.generator_at(s).matrix - K
    return K, D, model, spec


def test_rescale_scan_linear_trajectories():
    """With [K, D] = 0 the eigenvalues move as lambda(a) = -eta + i a sigma."""
    K, D, model, spec = _qubit_parts(0.6, 1.0, 1.0)
    base = np.sort_complex(eig_liouvillian(Liouvillian(matrix=K + D, dim=2)).eigenvalues)
    alphas = [0.5, 1.0, 2.0, 3.5]
    scan = rescale_scan(K, D, alphas)
    assert scan.commutator_defect <= 1e-12
    for a, ev in zip(alphas, scan.eigenvalues):
        want = np.sort_complex(base.real + 1j * a * base.imag)
        np.testing.assert_allclose(np.sort_complex(ev), want, atol=1e-9)


def test_rescale_scan_real_branches_invariant():
    K, D, _, _ = _qubit_parts(0.6, 1.0, 1.0)
    ev1 = np.sort_complex(eig_liouvillian(Liouvillian(matrix=K + D, dim=2)).eigenvalues)
    real_modes = sorted(lam.real for lam in ev1 if abs(lam.imag) < 1e-10)
    scan = rescale_scan(K, D, [1.0, 4.0, 9.0])
    for ev in scan.eigenvalues:
        got = sorted(lam.real for lam in ev if abs(lam.imag) < 1e-10)
        np.testing.assert_allclose(got, real_modes, atol=1e-9)


def test_rescale_scan_crossing_alpha_analytic():
    """Crossing where |G + i a d| = 2G, i.e. a* = sqrt(3) G / d."""
    K, D, model, spec = _qubit_parts(0.6, 1.0, 1.0)
    delta = float(spec.energies[1] - spec.energies[0])
    Gamma = 0.5 * ohmic_gamma(delta, model.g, model.beta) * (1 + math.exp(-model.beta * delta))
    a_star = math.sqrt(3.0) * Gamma / delta
    assert a_star > 1.0  # strong coupling: min modulus starts on the coherence branch
    scan = rescale_scan(K, D, np.linspace(0.5, 2.0 * a_star, 9))
    assert scan.crossing_alpha == pytest.approx(a_star, rel=1e-6)
