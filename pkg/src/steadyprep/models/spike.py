"""Permutation-symmetric "spike" problem in the collective-spin subspace.

n qubits, n divisible by 4, restricted to the symmetric (spin J = n/2)
subspace of dimension n + 1, indexed by Hamming weight w = 0..n
(magnetization m = n/2 - w).  The anneal interpolates

    H(s) = (1 - s) (n/2 - J_x) + s diag(f(w)),
    f(w) = n if w = n/4 else w,

so the classical cost has a spike of height n at weight n/4.  The bath
couples through the collective J_y with an Ohmic Davies dissipator; the
closed-system variant drops the bath and integrates the Schrodinger
equation in the same subspace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..evolve import DaviesSchedule
from ..superop import HamiltonianSpec, SpectralDensity, gibbs_state

__all__ = [
    "SpikeModel",
    "collective_ops",
    "spike_fvalues",
    "spike_hamiltonian",
    "spike_schedule",
    "spike_closed_system",
]


@dataclass(frozen=True)
class SpikeModel:
    n: int
    g: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.n % 4 or self.n <= 0:
            raise ValueError("n must be a positive multiple of 4 so the "
                             "spike weight n/4 is an integer")

    @property
    def dim(self) -> int:
        return self.n + 1


def collective_ops(n: int):
    """(J_x, J_y) for spin J = n/2 in the Hamming-weight basis.

    Basis index w corresponds to m = n/2 - w; raising m lowers w.
    """
    J = 0.5 * n
    m = J - np.arange(n + 1)  # m[w]
    # <m+1|J_+|m> = sqrt(J(J+1) - m(m+1)); acting on |w> gives |w-1>.
    up = np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1.0))
    Jp = np.zeros((n + 1, n + 1))
    Jp[np.arange(n), np.arange(1, n + 1)] = up
    Jx = 0.5 * (Jp + Jp.T)
    Jy = (Jp - Jp.T) / 2j
    return Jx, Jy.astype(complex)


def spike_fvalues(n: int) -> np.ndarray:
    f = np.arange(n + 1, dtype=float)
    f[n // 4] = n
    return f


def spike_hamiltonian(model: SpikeModel, s: float) -> np.ndarray:
    Jx, _ = collective_ops(model.n)
    driver = 0.5 * model.n * np.eye(model.n + 1) - Jx
    problem = np.diag(spike_fvalues(model.n))
    return (1.0 - s) * driver + s * problem


def spike_schedule(model: SpikeModel, tau: float) -> DaviesSchedule:
    _, Jy = collective_ops(model.n)
    sd = SpectralDensity(g=model.g, beta=model.beta)
    rho0 = gibbs_state(HamiltonianSpec.from_matrix(spike_hamiltonian(model, 0.0)),
                       model.beta)
    sched = DaviesSchedule(tau=tau, initial_state=rho0,
                           hamiltonian_fn=lambda s: spike_hamiltonian(model, s),
                           coupling=Jy, sd=sd)
    Jx, _ = collective_ops(model.n)
    hdot = (np.diag(spike_fvalues(model.n))
            - (0.5 * model.n * np.eye(model.n + 1) - Jx)).astype(complex)
    sched.hamiltonian_deriv = lambda s: hdot
    sched.hamiltonian_deriv2 = lambda s: np.zeros_like(hdot)
    return sched


def spike_closed_system(model: SpikeModel, tau: float, rtol: float = 1e-10,
                        atol: float = 1e-12) -> float:
    """Unitary anneal in the symmetric subspace; final ground-state TND.

    Starts in the driver ground state (the J_x = n/2 coherent state) and
    returns sqrt(1 - |<ground(1)|psi>|^2), the trace distance between the
    propagated pure state and the final ground state |w = 0>.
    """
    n = model.n
    w = np.arange(n + 1)
    amp = np.sqrt([math.comb(n, int(k)) for k in w]) / 2 ** (n / 2)
    psi0 = amp.astype(complex)
    if tau == 0.0:
        overlap = abs(psi0[0])
        return math.sqrt(max(1.0 - overlap**2, 0.0))
    Jx, _ = collective_ops(n)
    driver = 0.5 * n * np.eye(n + 1) - Jx
    problem = np.diag(spike_fvalues(n))

    def rhs(s, psi):
        H = (1.0 - s) * driver + s * problem
        return -1j * tau * (H @ psi)

    sol = solve_ivp(rhs, (0.0, 1.0), psi0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"closed-system integration failed: {sol.message}")
    psi = sol.y[:, -1]
    psi = psi / np.linalg.norm(psi)
    overlap = abs(psi[0])
    return math.sqrt(max(1.0 - overlap**2, 0.0))
