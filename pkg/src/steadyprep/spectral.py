"""Spectral analysis of Liouvillians: gaps, steady states, branch tracking.

Eigenvalues are written lambda_j = -eta_j + i sigma_j with eta_j >= 0 for a
valid generator.  Three gap notions are used:

* the adiabatic gap: min over the schedule of the smallest nonzero |lambda|,
* the relaxation gap: smallest nonzero decay rate eta of the final generator,
* the coherence-branch gap: min over the schedule of |lambda| on the branch
  whose eigenvector matches the |1><0| coherence of the instantaneous
  Hamiltonian eigenbasis.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .superop import Liouvillian, devectorize, vectorize

__all__ = [
    "DegenerateSteadyStateError",
    "NoSteadyStateError",
    "BranchTrackingError",
    "LiouvillianSpectrum",
    "GapReport",
    "eig_liouvillian",
    "steady_state",
    "gap_relax",
    "gap_adia",
    "gap_relevant",
    "gap_ordering_check",
    "rescale_scan",
    "default_null_tol",
]


class NoSteadyStateError(ValueError):
    pass


class DegenerateSteadyStateError(ValueError):
    pass


class BranchTrackingError(RuntimeError):
    pass


def default_null_tol(L: Liouvillian | np.ndarray) -> float:
    M = L.matrix if isinstance(L, Liouvillian) else np.asarray(L)
    return 1e-10 * max(np.linalg.norm(M, np.inf), 1e-300)


@dataclass(eq=False)
class LiouvillianSpectrum:
    """Sorted eigensystem of a Liouvillian.

    Eigenvalues are sorted by ascending decay rate eta = -Re(lambda), then by
    ascending |Im|, then by ascending phase, so index 0 is the steady state
    when one exists.  ``null_indices`` collects every eigenvalue with modulus
    below ``null_tol``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray  # columns, unit 2-norm
    null_tol: float
    null_indices: tuple
    condition: float

    @property
    def steady_index(self) -> int:
        if len(self.null_indices) == 0:
            raise NoSteadyStateError("no steady state found")
        if len(self.null_indices) > 1:
            raise DegenerateSteadyStateError(
                f"{len(self.null_indices)} eigenvalues within null tolerance; "
                "steady state not unique")
        return self.null_indices[0]

    def nonzero_eigenvalues(self) -> np.ndarray:
        mask = np.ones(len(self.eigenvalues), dtype=bool)
        mask[list(self.null_indices)] = False
        return self.eigenvalues[mask]

    def min_modulus_nonzero(self) -> complex:
        lam = self.nonzero_eigenvalues()
        if len(lam) == 0:
            raise ValueError("spectrum has no nonzero eigenvalues")
        return lam[np.argmin(np.abs(lam))]


def eig_liouvillian(L: Liouvillian, null_tol: float | None = None) -> LiouvillianSpectrum:
    """Dense eigendecomposition with deterministic ordering.

    A defective-looking eigenvector matrix (condition number above 1e8)
    triggers a warning rather than an error; downstream gap logic only needs
    eigenvalues in that case.
    """
    M = L.matrix
    if null_tol is None:
        null_tol = default_null_tol(L)
    lam, vecs = np.linalg.eig(M)
    eta = -lam.real
    order = np.lexsort((np.angle(lam), np.abs(lam.imag), eta))
    lam = lam[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    cond = float(np.linalg.cond(vecs))
    if cond > 1e8:
        warnings.warn(f"eigenvector matrix condition number {cond:.2e}; "
                      "generator may be close to defective", RuntimeWarning)
    null_indices = tuple(int(i) for i in np.nonzero(np.abs(lam) <= null_tol)[0])
    return LiouvillianSpectrum(eigenvalues=lam, right_vectors=vecs,
                               null_tol=null_tol, null_indices=null_indices,
                               condition=cond)


def steady_state(L: Liouvillian, null_tol: float | None = None,
                 spectrum: LiouvillianSpectrum | None = None) -> np.ndarray:
    """Unique trace-one fixed point of the generator.

    The eigenvector from :func:`eig_liouvillian` is polished by one bordered
    linear solve (generator plus a trace row) so the residual ``||L rho||`` is
    at working precision even for badly scaled generators.
    """
    if null_tol is None:
        null_tol = default_null_tol(L)
    if spectrum is None:
        spectrum = eig_liouvillian(L, null_tol)
    idx = spectrum.steady_index
    d = L.dim
    v = spectrum.right_vectors[:, idx]
    trace_row = vectorize(np.eye(d)).conj()
    tr = trace_row @ v
    scale = max(np.linalg.norm(L.matrix, np.inf), 1.0)
    if abs(tr) < 1e-12:
        raise NoSteadyStateError("null vector is traceless; no normalizable steady state")
    v = v / tr
    # one bordered solve: rows of L plus the trace constraint, least squares
    aug = np.vstack([L.matrix, scale * trace_row[None, :]])
    rhs = np.zeros(d * d + 1, dtype=complex)
    rhs[-1] = scale
    sol, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    if np.linalg.norm(L.matrix @ sol) <= np.linalg.norm(L.matrix @ v):
        v = sol
    rho = devectorize(v)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(L.matrix @ vectorize(rho))
    if residual > max(1e-9, 1e-12 * scale):
        warnings.warn(f"steady-state residual {residual:.2e}", RuntimeWarning)
    return rho


def gap_relax(L: Liouvillian, null_tol: float | None = None) -> float:
    """Smallest nonzero decay rate of the (fixed) generator.

    Purely imaginary eigenvalue pairs do not relax and are excluded; if no
    eigenvalue has a positive decay rate the generator does not mix and an
    error is raised.
    """
    if null_tol is None:
        null_tol = default_null_tol(L)
    spec = eig_liouvillian(L, null_tol)
    eta = -spec.eigenvalues.real
    eta = eta[eta > null_tol]
    if len(eta) == 0:
        raise ValueError("no relaxation gap: all eigenvalues are non-decaying")
    return float(eta.min())


@dataclass
class GapReport:
    """Gap summary for one schedule, JSON-serializable flat record."""

    delta_adia: float
    delta_relax: float
    delta_relevant: float | None
    argmin_s_adia: float
    sigma1_final: float
    grid_points: int = 0
    refine_rounds: int = 0
    crossings: tuple = ()

    def to_json(self) -> str:
        payload = {
            "delta_adia": self.delta_adia,
            "delta_relax": self.delta_relax,
            "delta_relevant": self.delta_relevant,
            "argmin_s_adia": self.argmin_s_adia,
            "sigma1_final": self.sigma1_final,
        }
        return json.dumps(payload, sort_keys=True)


def _grid_gap(L: Liouvillian, null_tol=None):
    """(smallest nonzero |lambda|, null dimension) of one generator."""
    if null_tol is None:
        null_tol = default_null_tol(L)
    lam = np.linalg.eigvals(L.matrix)
    mod = np.abs(lam)
    nz = mod[mod > null_tol]
    nulls = int((mod <= null_tol).sum())
    gap = float(nz.min()) if len(nz) else 0.0
    return gap, nulls


def gap_adia(schedule, s_grid: np.ndarray | int = 201, refine_rounds: int = 3,
             null_tol: float | None = None) -> GapReport:
    """Minimum modulus of nonzero eigenvalues along the schedule.

    The grid minimum is refined by ``refine_rounds`` of local three-point
    subdivision around the argmin.  Grid points whose stationary subspace is
    larger than the schedule's baseline are level crossings and reported as
    gap 0 at that location (flagged, not raised).
    """
    if np.isscalar(s_grid):
        s_grid = np.linspace(0.0, 1.0, int(s_grid))
    s_grid = np.asarray(s_grid, dtype=float)
    gaps = np.empty_like(s_grid)
    nulls = np.empty(len(s_grid), dtype=int)
    for i, s in enumerate(s_grid):
        gaps[i], nulls[i] = _grid_gap(schedule.generator_at(s), null_tol)
    base_null = nulls.min()
    crossings = tuple(float(s_grid[i]) for i in np.nonzero(nulls > base_null)[0])
    if crossings:
        warnings.warn(f"stationary subspace grows at s={crossings}; reporting gap 0 there",
                      RuntimeWarning)
        gaps[np.nonzero(nulls > base_null)[0]] = 0.0
    k = int(np.argmin(gaps))
    best_s, best_gap = float(s_grid[k]), float(gaps[k])
    if best_gap > 0.0:
        lo = s_grid[max(k - 1, 0)]
        hi = s_grid[min(k + 1, len(s_grid) - 1)]
        for _ in range(refine_rounds):
            probes = np.linspace(lo, hi, 5)
            vals = []
            for s in probes:
                g, _ = _grid_gap(schedule.generator_at(s), null_tol)
                vals.append(g)
            j = int(np.argmin(vals))
            if vals[j] < best_gap:
                best_gap, best_s = float(vals[j]), float(probes[j])
            lo = probes[max(j - 1, 0)]
            hi = probes[min(j + 1, 4)]
    L1 = schedule.generator_at(1.0)
    spec1 = eig_liouvillian(L1, null_tol)
    nz_idx = [i for i in range(len(spec1.eigenvalues)) if i not in spec1.null_indices]
    sigma1 = float(spec1.eigenvalues[nz_idx[0]].imag) if nz_idx else 0.0
    try:
        d_relax = gap_relax(L1, null_tol)
    except ValueError:
        d_relax = float("nan")
    try:
        d_rel = gap_relevant(schedule, s_grid, null_tol=null_tol)
    except (BranchTrackingError, AttributeError, TypeError):
        d_rel = None
    return GapReport(delta_adia=best_gap, delta_relax=d_relax, delta_relevant=d_rel,
                     argmin_s_adia=best_s, sigma1_final=sigma1,
                     grid_points=len(s_grid), refine_rounds=refine_rounds,
                     crossings=crossings)


def _coherence_branch(L: Liouvillian, ham_spec, null_tol=None):
    """Eigenvalue whose eigenvector best matches vec(|1><0|) of ham_spec."""
    spec = eig_liouvillian(L, null_tol)
    v0 = ham_spec.vectors[:, 0]
    v1 = ham_spec.vectors[:, 1]
    target = vectorize(np.outer(v1, v0.conj()))
    target = target / np.linalg.norm(target)
    overlaps = np.abs(target.conj() @ spec.right_vectors)
    j = int(np.argmax(overlaps))
    return spec.eigenvalues[j], float(overlaps[j])


def gap_relevant(schedule, s_grid: np.ndarray | int = 201, refine_rounds: int = 3,
                 null_tol: float | None = None) -> float:
    """Minimum modulus along the |1><0| coherence branch of the schedule.

    The branch is identified at every grid point by maximal eigenvector
    overlap with the vectorized coherence of the instantaneous Hamiltonian
    eigenbasis; an overlap below 0.5 means the branch is ambiguous.
    """
    if schedule.hamiltonian_at is None:
        raise BranchTrackingError("schedule does not expose an instantaneous Hamiltonian")
    if np.isscalar(s_grid):
        s_grid = np.linspace(0.0, 1.0, int(s_grid))
    s_grid = np.asarray(s_grid, dtype=float)

    def branch_at(s):
        lam, ov = _coherence_branch(schedule.generator_at(s),
                                    schedule.hamiltonian_at(s), null_tol)
        if ov < 0.5:
            raise BranchTrackingError(
                f"coherence branch ambiguous at s={s:.6f} (overlap {ov:.3f})")
        return abs(lam)

    vals = np.array([branch_at(s) for s in s_grid])
    k = int(np.argmin(vals))
    best = float(vals[k])
    lo = s_grid[max(k - 1, 0)]
    hi = s_grid[min(k + 1, len(s_grid) - 1)]
    for _ in range(refine_rounds):
        probes = np.linspace(lo, hi, 5)
        pv = [branch_at(s) for s in probes]
        j = int(np.argmin(pv))
        if pv[j] < best:
            best = float(pv[j])
        lo = probes[max(j - 1, 0)]
        hi = probes[min(j + 1, 4)]
    return best


def gap_ordering_check(report: GapReport, im_tol: float = 1e-9,
                       slack: float = 1e-9) -> tuple[bool, dict]:
    """Check the gap ordering implied by a non-oscillating slowest final mode.

    If the slowest nonzero eigenvalue of the final generator is real
    (sigma_1 = 0), the adiabatic gap can be at most the relaxation gap.
    Returns (ok, diagnostics); ok is True when the premise fails or the
    ordering holds within slack.
    """
    premise = abs(report.sigma1_final) <= im_tol
    ordered = report.delta_adia <= report.delta_relax + slack
    ok = (not premise) or ordered
    return ok, {
        "sigma1_final": report.sigma1_final,
        "delta_adia": report.delta_adia,
        "delta_relax": report.delta_relax,
        "premise_real_branch": premise,
        "ordering_holds": ordered,
    }


@dataclass
class RescaleScan:
    alphas: np.ndarray
    eigenvalues: list            # sorted spectrum per alpha
    min_branch: np.ndarray       # min-modulus nonzero eigenvalue per alpha
    min_is_real: np.ndarray      # whether that eigenvalue has sigma ~ 0
    crossing_alpha: float | None
    commutator_defect: float


def rescale_scan(K_part: np.ndarray, D_part: np.ndarray, alphas,
                 null_tol: float | None = None, im_tol: float = 1e-9) -> RescaleScan:
    """Spectra of alpha*K + D for a list of coherent rescalings alpha.

    When K and D commute the eigenvalue trajectories are exactly
    ``-eta_j + i alpha sigma_j``; a non-commuting pair only earns a warning
    since the scan is still well defined.  ``crossing_alpha`` interpolates the
    first switch of the minimum-modulus eigenvalue onto a real branch.
    """
    K = K_part.matrix if isinstance(K_part, Liouvillian) else np.asarray(K_part)
    D = D_part.matrix if isinstance(D_part, Liouvillian) else np.asarray(D_part)
    nK = np.linalg.norm(K, np.inf)
    nD = np.linalg.norm(D, np.inf)
    defect = 0.0
    if nK > 0 and nD > 0:
        defect = float(np.linalg.norm(K @ D - D @ K, np.inf) / (nK * nD))
    if defect > 1e-10:
        warnings.warn(f"coherent and dissipative parts do not commute "
                      f"(relative defect {defect:.2e}); rescaling is not exactly "
                      "eigenvalue-preserving", RuntimeWarning)
    alphas = np.asarray(alphas, dtype=float)
    d = round(np.sqrt(K.shape[0]))
    spectra = []
    min_branch = np.empty(len(alphas), dtype=complex)
    min_real = np.zeros(len(alphas), dtype=bool)
    scale = max(np.linalg.norm(D, np.inf), np.linalg.norm(K, np.inf))

    def classify(alpha):
        L = Liouvillian(matrix=alpha * K + D, dim=d)
        tol = null_tol if null_tol is not None else 1e-10 * max(scale, 1e-300)
        spec = eig_liouvillian(L, tol)
        lam = spec.min_modulus_nonzero()
        return spec.eigenvalues, lam, abs(lam.imag) <= im_tol * max(1.0, abs(lam))

    for i, a in enumerate(alphas):
        ev, lam, isreal = classify(a)
        spectra.append(ev)
        min_branch[i] = lam
        min_real[i] = isreal
    crossing = None
    flips = np.nonzero(min_real[1:] != min_real[:-1])[0]
    if len(flips):
        i = int(flips[0])
        lo, hi = alphas[i], alphas[i + 1]
        lo_state = min_real[i]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            _, _, isreal = classify(mid)
            if isreal == lo_state:
                lo = mid
            else:
                hi = mid
        crossing = float(0.5 * (lo + hi))
    elif min_real.all():
        crossing = float(alphas[0])
    return RescaleScan(alphas=alphas, eigenvalues=spectra, min_branch=min_branch,
                       min_is_real=min_real, crossing_alpha=crossing,
                       commutator_defect=defect)
