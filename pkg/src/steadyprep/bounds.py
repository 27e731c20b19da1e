"""Rigorous adiabatic error bound and its zero-temperature closed forms.

The bound on the final preparation error of a run of length tau is

    B = ||S(1) rho'(1)||_1 + ||S(0) rho'(0)||_1
        + int_0^1 ||S'(s) rho'(s) + S(s) rho''(s)||_1 ds,

with prime = d/ds, rho(s) the instantaneous steady state and S(s) the
reduced resolvent of the generator; the prepared state then satisfies
||rho(tau) - rho_ss||_1 <= B / tau.  At zero temperature every term
collapses onto Hamiltonian eigendata and the off-diagonal generator
eigenvalues lambda_{l,0}, giving the closed forms implemented below.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import spectral
from .evolve import Schedule
from .superop import HamiltonianSpec, Liouvillian, devectorize, vectorize

__all__ = [
    "DerivativeError",
    "ReducedResolvent",
    "reduced_resolvent",
    "BoundBreakdown",
    "adiabatic_B",
    "SrhopNorm",
    "zero_T_srhop_norm",
    "zero_T_eps",
    "zero_T_error_exact",
    "finite_T_correction",
    "ZeroTBoundReport",
    "zero_T_report",
    "coherence_eigenvalues",
]


class DerivativeError(RuntimeError):
    """Central finite differences failed the Richardson convergence check."""


@dataclass(eq=False)
class ReducedResolvent:
    """Pseudoinverse of the generator off its one-dimensional null space.

    Satisfies S @ L = L @ S = Q0 and S @ P0 = P0 @ S = 0, where
    P0 = |vec rho_ss><vec I| is the (oblique) steady-state projector.
    """

    matrix: np.ndarray
    steady_vec: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other


def reduced_resolvent(L: Liouvillian, steady: np.ndarray | None = None) -> ReducedResolvent:
    """Solve for S with S L = Q0 via one bordered linear system.

    The null pair of a trace-preserving generator is (vec rho_ss, vec I);
    adding c * P0 to L removes the singularity without touching the
    complement, and the solution automatically satisfies P0 S = 0.
    """
    if steady is None:
        steady = spectral.steady_state(L)
    d = L.dim
    r = vectorize(steady)
    ident = vectorize(np.eye(d))
    P0 = np.outer(r, ident.conj())
    Q0 = np.eye(d * d) - P0
    c = max(L.norm(), 1.0)
    S = np.linalg.solve(L.matrix + c * P0, Q0)
    return ReducedResolvent(matrix=S, steady_vec=r)


def _richardson_probe(fn, s, h, what):
    """Central-difference derivative of a vector map with step verification.

    Compares steps h, h/2, h/4; for an O(h^2) scheme the successive
    differences shrink by 4.  A ratio off by more than 20% (outside
    [3.2, 4.8]) on non-noise-floor data raises DerivativeError.
    """
    d1 = (fn(s + h) - fn(s - h)) / (2 * h)
    d2 = (fn(s + h / 2) - fn(s - h / 2)) / h
    d4 = (fn(s + h / 4) - fn(s - h / 4)) / (h / 2)
    e12 = np.linalg.norm(d1 - d2)
    e24 = np.linalg.norm(d2 - d4)
    scale = np.linalg.norm(d1)
    floor = 1e-10 * max(scale, 1.0)
    if e24 > floor:
        ratio = e12 / e24
        if not (3.2 <= ratio <= 4.8):
            raise DerivativeError(
                f"finite differences for {what} at s={s:g} not in the "
                f"quadratic regime (Richardson ratio {ratio:.2f}); "
                f"adjust fd_step")
    # Richardson-extrapolated value from the two finest steps.
    return (4.0 * d4 - d2) / 3.0


@dataclass
class BoundBreakdown:
    """adiabatic_B result with its three terms and the sampled integrand."""

    total: float
    boundary_initial: float
    boundary_final: float
    integral: float
    s: np.ndarray = field(repr=False)
    integrand: np.ndarray = field(repr=False)

    def __float__(self):
        return self.total


def adiabatic_B(schedule: Schedule, s_grid: int = 41, fd_step: float = 1e-4,
                check_points: int = 3) -> BoundBreakdown:
    """Evaluate the adiabatic bound B for the schedule.

    Steady states and reduced resolvents are rebuilt at every needed s
    (schedules must accept s slightly outside [0, 1]); derivatives are
    central differences with step fd_step, verified by Richardson ratio at
    the boundaries and at ``check_points`` interior nodes; the integral is
    composite Simpson on an odd uniform grid.
    """
    if s_grid < 3 or s_grid % 2 == 0:
        raise ValueError("s_grid must be odd and >= 3 for composite Simpson")
    h = fd_step
    ss_cache: dict[float, np.ndarray] = {}
    S_cache: dict[float, np.ndarray] = {}

    def ss(s):
        key = round(float(s), 12)
        if key not in ss_cache:
            ss_cache[key] = vectorize(schedule.steady_state_at(s))
        return ss_cache[key]

    def Smat(s):
        key = round(float(s), 12)
        if key not in S_cache:
            rho = devectorize(ss(s))
            S_cache[key] = reduced_resolvent(schedule.generator_at(s), rho).matrix
        return S_cache[key]

    def rho_prime(s):
        return (ss(s + h) - ss(s - h)) / (2 * h)

    def srho(s):
        return Smat(s) @ rho_prime(s)

    def tn(vec):
        return float(np.abs(np.linalg.svd(devectorize(vec), compute_uv=False)).sum())

    nodes = np.linspace(0.0, 1.0, s_grid)
    checks = {0.0, 1.0}
    if check_points > 0:
        checks.update(nodes[np.linspace(1, s_grid - 2, check_points, dtype=int)])
    for s in sorted(checks):
        _richardson_probe(ss, s, h, "rho_ss")
    b0 = tn(srho(0.0))
    b1 = tn(srho(1.0))
    integrand = np.empty(s_grid)
    for i, s in enumerate(nodes):
        integrand[i] = tn((srho(s + h) - srho(s - h)) / (2 * h))
    integral = float(simpson(integrand, x=nodes))
    return BoundBreakdown(total=b0 + b1 + integral, boundary_initial=b0,
                          boundary_final=b1, integral=integral,
                          s=nodes, integrand=integrand)


def _eigdata(spec: HamiltonianSpec, Hop: np.ndarray):
    V = spec.vectors
    return V.conj().T @ Hop @ V


def _check_ground_gap(spec: HamiltonianSpec):
    E = spec.energies
    gaps = E[1:] - E[0]
    if gaps.size == 0:
        raise ValueError("need at least two levels")
    if gaps[0] <= 1e-12 * max(spec.scale(), 1.0):
        raise ValueError("degenerate ground state; zero-T closed forms assume "
                         "a unique ground level")
    return gaps


@dataclass
class SrhopNorm:
    """Zero-temperature ||S rho'||_1: full sum and its leading single term."""

    full: float
    leading: float
    leading_level: int
    level_flagged: bool  # True when the dominant level is not l = 1


def zero_T_srhop_norm(spec: HamiltonianSpec, Hprime: np.ndarray,
                      lambdas: np.ndarray) -> SrhopNorm:
    """Boundary-term norm 2 sqrt(sum_l |<l|H'|0> / (Delta_l lambda_l)|^2).

    lambdas[l] is the generator eigenvalue of the coherence |l><0| (entry 0
    is ignored).  The leading term keeps only the largest summand; if that
    is not l = 1 the report is flagged.
    """
    gaps = _check_ground_gap(spec)
    hp = _eigdata(spec, Hprime)
    lam = np.asarray(lambdas)
    terms = np.abs(hp[1:, 0] / (gaps * lam[1:]))
    full = 2.0 * float(np.sqrt(np.sum(terms**2)))
    k = int(np.argmax(terms)) + 1
    return SrhopNorm(full=full, leading=2.0 * float(terms[k - 1]),
                     leading_level=k, level_flagged=(k != 1))


def zero_T_eps(spec: HamiltonianSpec, Hprime: np.ndarray,
               lambda_10: complex) -> float:
    """Leading zero-T integrand eps(s), from levels 0 and 1 only."""
    gaps = _check_ground_gap(spec)
    hp = _eigdata(spec, Hprime)
    delta = gaps[0]
    off = abs(hp[1, 0])
    diag = abs(hp[1, 1] - hp[0, 0])
    return (4.0 * (off / delta**2) * diag / abs(lambda_10)
            + 4.0 * (off / delta) ** 2 * abs((1.0 / lambda_10).real))


def zero_T_error_exact(spec: HamiltonianSpec, Hprime: np.ndarray,
                       Hpp: np.ndarray, lambdas: np.ndarray,
                       dlambdas: np.ndarray | None = None,
                       cond_tol: float = 1e-12) -> float:
    """Trace norm of the exact zero-T operator S'rho' + S rho''.

    The operator is rank <= 4:

        A |0><0| + |xi><eta| + |eta><xi| + |0><phi| + |phi><0|

    assembled from Hamiltonian matrix elements in the instantaneous
    eigenbasis, the coherence eigenvalues lambdas[l] = lambda_{l,0} and
    their s-derivatives dlambdas (zeros when omitted, which drops the
    rate-drift term; pass finite differences for moving spectra).  The
    norm is evaluated in the orthonormalized span {|0>,|1>,xi,eta,phi}.
    Near-degenerate intermediate gaps E_l ~ E_m trigger a conditioning
    warning: the parenthesis in the pair sum vanishes analytically in that
    limit, but its floating-point evaluation loses digits.
    """
    E = spec.energies
    d = spec.dim
    gaps = _check_ground_gap(spec)
    hp = _eigdata(spec, Hprime)
    hpp = _eigdata(spec, Hpp)
    lam = np.asarray(lambdas, dtype=complex)
    dlam = np.zeros(d, dtype=complex) if dlambdas is None else np.asarray(dlambdas,
                                                                          dtype=complex)
    g = hp[1:, 0] / gaps  # <l|H'|0> / Delta_l, l = 1..d-1
    inv_lam = 1.0 / lam[1:]
    A = -2.0 * float(np.sum(np.abs(g) ** 2 * inv_lam.real))
    xi = np.concatenate([[0.0], g * inv_lam])
    eta = np.concatenate([[0.0], g])
    phi = np.zeros(d, dtype=complex)
    scale = max(spec.scale(), 1.0)
    for li in range(1, d):
        dl = E[li] - E[0]
        t4 = (hp[li, 0] / dl) * dlam[li] / lam[li] ** 2
        t5 = -(hpp[li, 0] / dl) / lam[li]
        t3 = 0.0 + 0.0j
        t6 = 0.0 + 0.0j
        for mi in range(1, d):
            if mi == li:
                continue
            dlm = E[li] - E[mi]
            if dlm == 0.0:
                raise ValueError(
                    f"levels {li} and {mi} are exactly degenerate; the "
                    "pair sum of the exact zero-T form is undefined")
            if abs(dlm) < cond_tol * scale:
                warnings.warn(
                    f"intermediate gap |E_{li}-E_{mi}| = {abs(dlm):.2e} is "
                    "near zero; the pair term cancels analytically but "
                    "loses precision here", RuntimeWarning)
            dm = E[mi] - E[0]
            pair = hp[mi, 0] * hp[li, mi] / dlm
            t3 += pair * (1.0 / (dm * lam[mi]) - 1.0 / (dl * lam[li]))
            t6 += (hp[li, mi] / dl) * (hp[mi, 0] / dm) / lam[li]
        t7 = 2.0 * hp[li, 0] * (hp[li, li] - hp[0, 0]) / (dl**2 * lam[li])
        phi[li] = t3 + t4 + t5 + t6 + t7
    basis = np.zeros((d, 5), dtype=complex)
    basis[0, 0] = 1.0
    basis[1, 1] = 1.0
    basis[:, 2] = xi
    basis[:, 3] = eta
    basis[:, 4] = phi
    q, r = np.linalg.qr(basis)
    keep = np.abs(np.diag(r)) > 1e-14 * max(1.0, np.abs(np.diag(r)).max())
    q = q[:, keep]
    a0 = q.conj().T @ basis[:, 0]
    bx = q.conj().T @ xi
    ce = q.conj().T @ eta
    ff = q.conj().T @ phi
    op = (A * np.outer(a0, a0.conj()) + np.outer(bx, ce.conj())
          + np.outer(ce, bx.conj()) + np.outer(a0, ff.conj())
          + np.outer(ff, a0.conj()))
    return float(np.linalg.svd(op, compute_uv=False).sum())


def finite_T_correction(delta_min: float, T: float) -> float:
    """Size of the neglected finite-temperature terms, T^-2 exp(-Delta/T).

    A diagnostic scale for the zero-T closed forms, not an additive bound.
    """
    if T <= 0 or delta_min <= 0:
        raise ValueError("need T > 0 and delta_min > 0")
    logval = -2.0 * math.log(T) - delta_min / T
    return math.exp(logval) if logval > -745.0 else 0.0


def coherence_eigenvalues(L: Liouvillian, spec: HamiltonianSpec) -> np.ndarray:
    """Generator eigenvalues on the |l><0| coherence branches, l = 1..d-1.

    Each branch is identified by maximum eigenvector overlap with the
    vectorized coherence; entry 0 of the returned array is nan.
    """
    es = spectral.eig_liouvillian(L)
    V = spec.vectors
    out = np.full(spec.dim, np.nan, dtype=complex)
    ground = V[:, 0]
    for l in range(1, spec.dim):
        target = vectorize(np.outer(V[:, l], ground.conj()))
        target = target / np.linalg.norm(target)
        overlaps = np.abs(target.conj() @ es.right_vectors)
        k = int(np.argmax(overlaps))
        if overlaps[k] < 0.5:
            raise spectral.BranchTrackingError(
                f"no generator eigenvector matches coherence |{l}><0| "
                f"(best overlap {overlaps[k]:.3f})")
        out[l] = es.eigenvalues[k]
    return out


@dataclass
class ZeroTBoundReport:
    """Zero-temperature bound pieces sampled along a schedule."""

    s: np.ndarray
    eps_leading: np.ndarray
    eps_exact: np.ndarray
    B_int: float
    B_max: float
    boundary_terms: tuple[float, float]
    finite_T_scale: float
    level_flagged: bool
    variant: str

    @property
    def total(self) -> float:
        return self.boundary_terms[0] + self.boundary_terms[1] + self.B_int

    def to_csv(self, path, metadata: str = "") -> None:
        with open(path, "w") as fh:
            if metadata:
                fh.write(f"# {metadata}\n")
            fh.write("s,eps_leading,eps_exact\n")
            for i, s in enumerate(self.s):
                fh.write(f"{s:.10g},{self.eps_leading[i]:.12g},"
                         f"{self.eps_exact[i]:.12g}\n")

    def summary(self) -> dict:
        return {
            "B_int": self.B_int,
            "B_max": self.B_max,
            "boundary_initial": self.boundary_terms[0],
            "boundary_final": self.boundary_terms[1],
            "total": self.total,
            "finite_T_scale": self.finite_T_scale,
            "level_flagged": self.level_flagged,
            "variant": self.variant,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def zero_T_report(schedule: Schedule, s_grid: int = 41, fd_step: float = 1e-4,
                  variant: str = "exact", beta: float | None = None) -> ZeroTBoundReport:
    """Sample the zero-T closed forms along a schedule.

    Per grid node: diagonalize H(s), track all coherence branches of the
    generator spectrum, finite-difference both lambda_{l,0}(s) and (unless
    the schedule provides analytic ones) H'(s), H''(s).  ``variant``
    selects which eps curve feeds B_int and B_max ("exact" or "leading").
    """
    if s_grid < 3 or s_grid % 2 == 0:
        raise ValueError("s_grid must be odd and >= 3 for composite Simpson")
    if variant not in ("exact", "leading"):
        raise ValueError(f"unknown variant {variant!r}")
    h = fd_step

    def ham(s) -> HamiltonianSpec:
        out = schedule.hamiltonian_at(s)
        if not isinstance(out, HamiltonianSpec):
            out = HamiltonianSpec.from_matrix(out)
        return out

    deriv = getattr(schedule, "hamiltonian_deriv", None)
    deriv2 = getattr(schedule, "hamiltonian_deriv2", None)

    def hprime(s):
        if deriv is not None:
            return deriv(s)
        return (ham(s + h).matrix - ham(s - h).matrix) / (2 * h)

    def hpp(s):
        if deriv2 is not None:
            return deriv2(s)
        return (ham(s + h).matrix - 2 * ham(s).matrix + ham(s - h).matrix) / h**2

    def lambdas(s):
        return coherence_eigenvalues(schedule.generator_at(s), ham(s))

    nodes = np.linspace(0.0, 1.0, s_grid)
    eps_lead = np.empty(s_grid)
    eps_exact = np.empty(s_grid)
    flagged = False
    delta_min = np.inf
    for i, s in enumerate(nodes):
        spec_s = ham(s)
        lam = lambdas(s)
        hp = hprime(s)
        eps_lead[i] = zero_T_eps(spec_s, hp, lam[1])
        if variant == "exact":
            dlam = (lambdas(s + h) - lambdas(s - h)) / (2 * h)
            dlam[0] = 0.0
            eps_exact[i] = zero_T_error_exact(spec_s, hp, hpp(s), lam, dlam)
        else:
            eps_exact[i] = np.nan
        delta_min = min(delta_min, spec_s.energies[1] - spec_s.energies[0])
    curve = eps_exact if variant == "exact" else eps_lead
    B_int = float(simpson(curve, x=nodes))
    B_max = float(curve.max())
    bts = []
    for s in (0.0, 1.0):
        rep = zero_T_srhop_norm(ham(s), hprime(s), lambdas(s))
        flagged = flagged or rep.level_flagged
        bts.append(rep.full)
    if beta is None:
        beta = getattr(getattr(schedule, "sd", None), "beta", None)
    scale = finite_T_correction(delta_min, 1.0 / beta) if beta else float("nan")
    return ZeroTBoundReport(s=nodes, eps_leading=eps_lead, eps_exact=eps_exact,
                            B_int=B_int, B_max=B_max,
                            boundary_terms=(bts[0], bts[1]),
                            finite_T_scale=scale, level_flagged=flagged,
                            variant=variant)
