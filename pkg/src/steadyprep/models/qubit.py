"""Single qubit in a thermal Ohmic bath, ramped from sigma^x to sigma^z.

H(s) = (1-s) omega_x sigma^x + s omega_z sigma^z with sigma^y bath
coupling.  The instantaneous level splitting is

    delta(s) = 2 sqrt((1-s)^2 omega_x^2 + s^2 omega_z^2)

and the Davies generator diagonalizes in closed form: eigenvalues
{0, -2 Gamma, -Gamma +- i delta} with 2 Gamma = gamma(delta)(1 + e^{-beta
delta}).  The defaults omega_x = omega_z = 1/sqrt(2) normalize the minimum
splitting to delta_min = 1 (at s = 1/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..evolve import DaviesSchedule
from ..superop import SpectralDensity, gibbs_state, ohmic_gamma, HamiltonianSpec

__all__ = [
    "QubitModel",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "qubit_hamiltonian",
    "qubit_delta",
    "qubit_schedule",
    "qubit_analytic_spectrum",
    "delta_relevant_analytic",
    "delta_adia_analytic",
    "crossing_coupling",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class QubitModel:
    omega_x: float = 2.0**-0.5
    omega_z: float = 2.0**-0.5
    g: float = 0.1
    beta: float = 1.0

    def __post_init__(self):
        if self.omega_x <= 0 or self.omega_z <= 0:
            raise ValueError("both frequencies must be positive so the "
                             "splitting never closes")


def qubit_hamiltonian(model: QubitModel, s: float) -> np.ndarray:
    return (1.0 - s) * model.omega_x * SIGMA_X + s * model.omega_z * SIGMA_Z


def qubit_delta(model: QubitModel, s):
    s = np.asarray(s, dtype=float)
    return 2.0 * np.sqrt(((1.0 - s) * model.omega_x) ** 2 + (s * model.omega_z) ** 2)


def _gamma_big(model: QubitModel, s):
    """Gamma(s): half the population relaxation rate 2Gamma."""
    delta = qubit_delta(model, s)
    rate = ohmic_gamma(delta, model.g, model.beta)
    return 0.5 * rate * (1.0 + np.exp(-model.beta * delta))


def qubit_schedule(model: QubitModel, tau: float) -> DaviesSchedule:
    sd = SpectralDensity(g=model.g, beta=model.beta)
    rho0 = gibbs_state(HamiltonianSpec.from_matrix(qubit_hamiltonian(model, 0.0)),
                       model.beta)
    sched = DaviesSchedule(tau=tau, initial_state=rho0,
                           hamiltonian_fn=lambda s: qubit_hamiltonian(model, s),
                           coupling=SIGMA_Y, sd=sd)
    sched.hamiltonian_deriv = lambda s: (model.omega_z * SIGMA_Z
                                         - model.omega_x * SIGMA_X)
    sched.hamiltonian_deriv2 = lambda s: np.zeros((2, 2), dtype=complex)
    return sched


def qubit_analytic_spectrum(model: QubitModel, s: float) -> np.ndarray:
    """The four generator eigenvalues {0, -2G, -G - i delta, -G + i delta}."""
    delta = float(qubit_delta(model, s))
    G = float(_gamma_big(model, s))
    return np.array([0.0, -2.0 * G, -G - 1j * delta, -G + 1j * delta])


def delta_relevant_analytic(model: QubitModel, s_grid: int = 2001) -> float:
    s = np.linspace(0.0, 1.0, s_grid)
    return float(np.min(np.hypot(_gamma_big(model, s), qubit_delta(model, s))))


def delta_adia_analytic(model: QubitModel, s_grid: int = 2001) -> float:
    s = np.linspace(0.0, 1.0, s_grid)
    G = _gamma_big(model, s)
    return float(min(np.min(np.hypot(G, qubit_delta(model, s))), np.min(2.0 * G)))


def crossing_coupling(beta: float, g_lo: float = 0.1, g_hi: float = 1.0,
                      s_grid: int = 2001, iters: int = 60) -> float:
    """Coupling g* where min_s |lambda_{1,0}| = min_s |lambda_{1,1}|.

    Below g* the population mode 2 Gamma is the slowest; above it the
    coherence branch takes over.  Bisection on the analytic spectrum.
    """

    def split(g):
        m = QubitModel(g=g, beta=beta)
        s = np.linspace(0.0, 1.0, s_grid)
        G = _gamma_big(m, s)
        return float(np.min(np.hypot(G, qubit_delta(m, s))) - np.min(2.0 * G))

    f_lo, f_hi = split(g_lo), split(g_hi)
    if f_lo * f_hi > 0:
        raise ValueError(f"no crossing bracketed in [{g_lo}, {g_hi}]")
    for _ in range(iters):
        mid = 0.5 * (g_lo + g_hi)
        fm = split(mid)
        if f_lo * fm <= 0:
            g_hi, f_hi = mid, fm
        else:
            g_lo, f_lo = mid, fm
    return 0.5 * (g_lo + g_hi)
