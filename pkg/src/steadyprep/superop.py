"""Dense superoperator construction for Lindblad master equations.

Conventions used throughout the package:

* density matrices are plain complex ndarrays, column-stacked by
  :func:`vectorize` (``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``),
* a Liouvillian is the dense ``d**2 x d**2`` matrix generating
  ``d(vec rho)/dt = L @ vec(rho)``,
* the coherent part of ``-i[H, rho]`` maps to ``-i (I (x) H - H.T (x) I)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "vectorize",
    "devectorize",
    "SpectralDensity",
    "HamiltonianSpec",
    "Liouvillian",
    "build_lindbladian",
    "ohmic_gamma",
    "bohr_frequencies",
    "davies_generator",
    "davies_parts",
    "gibbs_state",
    "assert_density_matrix",
]


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stack a d x d matrix into a d**2 vector."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    d = round(np.sqrt(vec.size))
    if d * d != vec.size:
        raise ValueError(f"vector of length {vec.size} is not a stacked square matrix")
    return vec.reshape(d, d, order="F")


def assert_density_matrix(rho: np.ndarray, *, herm_tol: float = 1e-10,
                          trace_tol: float = 1e-9, eig_tol: float = 1e-9) -> None:
    """Raise AssertionError unless rho is Hermitian, unit trace and PSD within tolerance."""
    rho = np.asarray(rho)
    assert rho.ndim == 2 and rho.shape[0] == rho.shape[1]
    assert np.linalg.norm(rho - rho.conj().T, np.inf) <= herm_tol, "not Hermitian"
    assert abs(np.trace(rho) - 1.0) <= trace_tol, f"trace {np.trace(rho)}"
    evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    assert evals.min() >= -eig_tol, f"negative eigenvalue {evals.min()}"


@dataclass(frozen=True)
class SpectralDensity:
    """Ohmic bath spectral function gamma(w) = 2 pi g^2 w / (1 - exp(-beta w))."""

    g: float
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.g < 0:
            raise ValueError("coupling g must be non-negative")

    def rate(self, omega):
        return ohmic_gamma(omega, self.g, self.beta)


def ohmic_gamma(omega, g: float, beta: float):
    """Ohmic transition rate, vectorized over omega.

    The w -> 0 limit is 2 pi g^2 / beta; large negative beta*w underflows
    gracefully to zero, which keeps detailed balance exact in float.
    """
    omega = np.asarray(omega, dtype=float)
    x = beta * omega
    out = np.empty_like(omega)
    small = np.abs(x) < 1e-8
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        denom = -np.expm1(-x)
        out = np.where(small, (1.0 + x / 2.0) / beta, omega / np.where(small, 1.0, denom))
    # beta*omega very negative: expm1 overflows; use the explicit tail
    # omega / (1 - e^{-x}) -> -omega e^{x}, which underflows gracefully
    deep = x < -700.0
    if np.any(deep):
        tail = -omega * np.exp(np.where(deep, x, 0.0))
        out = np.where(deep, tail, out)
    result = 2.0 * np.pi * g * g * out
    return float(result) if np.isscalar(omega) or result.ndim == 0 else result


@dataclass
class HamiltonianSpec:
    """Eigendecomposition of a Hermitian matrix, energies ascending."""

    energies: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors, unitary
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, H: np.ndarray) -> "HamiltonianSpec":
        H = np.asarray(H, dtype=complex)
        herm_defect = np.linalg.norm(H - H.conj().T, np.inf)
        if herm_defect > 1e-10 * max(1.0, np.linalg.norm(H, np.inf)):
            raise ValueError(f"Hamiltonian not Hermitian (defect {herm_defect:.3e})")
        energies, vectors = np.linalg.eigh(H)
        return cls(energies=energies, vectors=vectors, matrix=H)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def scale(self) -> float:
        return max(float(np.max(np.abs(self.energies))), 1.0e-300)


@dataclass(eq=False)
class Liouvillian:
    """Dense generator acting on column-stacked density matrices."""

    matrix: np.ndarray
    dim: int
    labels: dict = field(default_factory=dict)
    _eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.dim**2, self.dim**2):
            raise ValueError("Liouvillian matrix must be d^2 x d^2")

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, np.inf))

    def __matmul__(self, vec):
        return self.matrix @ vec


def build_lindbladian(H: np.ndarray, jump_ops=()) -> Liouvillian:
    """Assemble -i[H, .] + sum_a rate_a D[L_a] as a dense superoperator.

    ``jump_ops`` is an iterable of either operators (unit rate) or
    ``(operator, rate)`` pairs.
    """
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for item in jump_ops:
        if isinstance(item, tuple):
            op, rate = item
        else:
            op, rate = item, 1.0
        op = np.asarray(op, dtype=complex)
        opdag_op = op.conj().T @ op
        L += rate * (
            np.kron(op.conj(), op)
            - 0.5 * np.kron(eye, opdag_op)
            - 0.5 * np.kron(opdag_op.T, eye)
        )
    return Liouvillian(matrix=L, dim=d)


def bohr_frequencies(spec: HamiltonianSpec, tol: float | None = None):
    """Cluster all energy differences E_l - E_m into frequency groups.

    Returns ``(omegas, group)`` where ``omegas[g]`` is the representative
    frequency of group ``g`` and ``group[m, l]`` assigns the (m, l) matrix
    entry (transition l -> m, frequency E_l - E_m) to its group.
    """
    E = np.asarray(spec.energies, dtype=float)
    if tol is None:
        tol = 1e-9 * spec.scale()
    diff = E[None, :] - E[:, None]  # diff[m, l] = E_l - E_m
    flat = diff.ravel()
    order = np.argsort(flat)
    sorted_vals = flat[order]
    # split the sorted differences where consecutive gaps exceed tol
    breaks = np.nonzero(np.diff(sorted_vals) > tol)[0]
    bounds = np.concatenate(([0], breaks + 1, [len(sorted_vals)]))
    group_flat = np.empty(len(flat), dtype=int)
    omegas = np.empty(len(bounds) - 1)
    for gidx in range(len(bounds) - 1):
        segment = order[bounds[gidx]:bounds[gidx + 1]]
        group_flat[segment] = gidx
        omegas[gidx] = sorted_vals[bounds[gidx]:bounds[gidx + 1]].mean()
    # snap the group containing the diagonal pairs to exactly zero
    d = len(E)
    diag_idx = np.arange(d) * d + np.arange(d)  # positions of (m, m) in ravel of [m, l]
    zg = group_flat[diag_idx[0]]
    if not np.all(group_flat[diag_idx] == zg):
        raise ValueError("zero-frequency pairs split across groups; tolerance too small")
    omegas[zg] = 0.0
    return omegas, group_flat.reshape(diff.shape)


@dataclass(eq=False)
class DaviesParts:
    """Energy-basis pieces of a Davies generator, for fast repeated application."""

    spec: HamiltonianSpec
    sandwich: np.ndarray       # d^2 x d^2 superoperator of sum_w gamma L_w . L_w^dag (energy basis)
    sink: np.ndarray           # N = sum_w gamma L_w^dag L_w (d x d, energy basis)
    omega_groups: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Evaluate the full generator (coherent + dissipative) on rho."""
        V = self.spec.vectors
        E = self.spec.energies
        rt = V.conj().T @ rho @ V
        out = -1j * (E[:, None] - E[None, :]) * rt
        out += devectorize(self.sandwich @ vectorize(rt))
        out -= 0.5 * (self.sink @ rt + rt @ self.sink)
        return V @ out @ V.conj().T

    def apply_vec(self, vec: np.ndarray) -> np.ndarray:
        return vectorize(self.apply(devectorize(vec)))


def davies_parts(spec: HamiltonianSpec, A: np.ndarray, sd: SpectralDensity,
                 tol: float | None = None) -> DaviesParts:
    """Build the energy-basis pieces of the Davies generator for coupling A.

    The jump operator at frequency w is ``L_w = sum_{E_l - E_m = w} P_m A P_l``;
    entries of ``A`` in the energy basis are routed to their frequency group and
    weighted by the Ohmic rate, keeping degenerate groups (including w = 0) intact.
    """
    A = np.asarray(A, dtype=complex)
    if np.linalg.norm(A - A.conj().T, np.inf) > 1e-10 * max(1.0, np.linalg.norm(A, np.inf)):
        raise ValueError("coupling operator must be Hermitian")
    omegas, group = bohr_frequencies(spec, tol)
    V = spec.vectors
    At = V.conj().T @ A @ V  # At[m, l] belongs to frequency omega = E_l - E_m
    gam = sd.rate(omegas)[group]  # gamma evaluated per entry
    weighted = gam * At
    cA = At.conj()
    # sandwich[(m + d n), (l + d k)] = gamma(w_{ml}) At[m,l] conj(At[n,k]) [group(m,l)==group(n,k)]
    mask4 = group[None, :, None, :] == group[:, None, :, None]  # axes (n, m, k, l)
    four = weighted[None, :, None, :] * cA[:, None, :, None]
    four = np.where(mask4, four, 0.0)
    d = spec.dim
    sandwich = four.reshape(d * d, d * d)
    # sink[l, k] = sum_m gamma(w_{ml}) conj(At[m,l]) At[m,k] [group(m,l)==group(m,k)]
    mask3 = group[:, :, None] == group[:, None, :]
    three = (gam * cA)[:, :, None] * At[:, None, :]
    sink = np.where(mask3, three, 0.0).sum(axis=0)
    return DaviesParts(spec=spec, sandwich=sandwich, sink=sink, omega_groups=group)


def davies_generator(spec: HamiltonianSpec, A: np.ndarray, sd: SpectralDensity,
                     tol: float | None = None) -> Liouvillian:
    """Full Davies Liouvillian in the fixed (computational) basis.

    The Lamb shift is taken to be zero: the coherent part is generated by the
    bare Hamiltonian.  With the Ohmic rates of :class:`SpectralDensity` the
    generator satisfies quantum detailed balance and fixes the Gibbs state.
    """
    parts = davies_parts(spec, A, sd, tol)
    d = spec.dim
    eye = np.eye(d)
    E = spec.energies
    Ht = np.diag(E.astype(complex))
    Lt = -1j * (np.kron(eye, Ht) - np.kron(Ht.T, eye))
    Lt += parts.sandwich
    Lt -= 0.5 * (np.kron(eye, parts.sink) + np.kron(parts.sink.T, eye))
    V = spec.vectors
    rot = np.kron(V.conj(), V)
    L = rot @ Lt @ rot.conj().T
    return Liouvillian(matrix=L, dim=d, labels={"kind": "davies", "g": sd.g, "beta": sd.beta})


def gibbs_state(spec: HamiltonianSpec | np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta H)/Z, computed stably via the spectral decomposition."""
    if not isinstance(spec, HamiltonianSpec):
        spec = HamiltonianSpec.from_matrix(spec)
    E = spec.energies
    w = np.exp(-beta * (E - E.min()))
    w /= w.sum()
    V = spec.vectors
    return (V * w[None, :]) @ V.conj().T
