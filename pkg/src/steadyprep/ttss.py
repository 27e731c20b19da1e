"""Time-to-steady-state (TTSS) solvers.

Both protocols are reduced to root finding on a scalar map t -> d(t) - eps,
where d is the trace distance to the target steady state at the end of a run
of length t.  The map is not assumed monotone (coherent oscillations make it
wiggle), so the solver first brackets a crossing by exponential sweep and
then bisects/secants inside the bracket.  A ``non_monotone`` flag is raised
when later sweep samples sit above an earlier sub-threshold sample.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .evolve import Schedule, propagate_adiabatic, propagate_relax, trace_norm_distance
from .superop import Liouvillian

__all__ = [
    "TTSSRecord",
    "ScalingEstimate",
    "solve_ttss",
    "ttss_relax",
    "ttss_adia",
    "ttss_instantaneous",
    "TTSS_CSV_HEADER",
    "record_csv_row",
    "estimate_relax",
    "estimate_adia",
    "fit_power_law",
]


@dataclass
class TTSSRecord:
    """One solved time-to-threshold, with solver diagnostics."""

    time: float
    epsilon: float
    residual: float  # |d(time) - epsilon|
    evaluations: int
    non_monotone: bool = False
    timed_out: bool = False
    notes: str = ""

    @property
    def flagged(self) -> bool:
        return self.non_monotone or self.timed_out


@dataclass
class ScalingEstimate:
    """A priori TTSS estimate from gap and amplitude data."""

    time: float
    gap: float
    amplitude: float
    kind: str


def _observed_non_monotone(samples, slack=1e-8):
    """True if the sampled (t, d) pairs cannot come from a non-increasing d."""
    ordered = sorted(samples)
    for (t0, d0), (t1, d1) in zip(ordered, ordered[1:]):
        if d1 > d0 + slack:
            return True
    return False


def solve_ttss(distance_fn, epsilon: float, t_hint: float | None = None,
               t_max: float = np.inf, bracket_factor: float = 2.0,
               rel_residual: float = 1e-3, rel_time: float = 1e-4,
               max_evals: int = 400) -> TTSSRecord:
    """Find the first down-crossing of distance_fn through epsilon.

    distance_fn must be deterministic.  The sweep starts from ``t_hint``
    (falling back to 1.0), multiplies by ``bracket_factor`` until the
    threshold is crossed, then refines with a safeguarded secant until
    |d(t) - eps| <= rel_residual * eps.  Every sample is recorded; if the
    collection is inconsistent with a monotone-decreasing curve the record
    is flagged ``non_monotone`` (the returned time is then the smallest
    bracketed root, which may not be the global first crossing; rerun with
    bracket_factor close to 1 to resolve ringing curves).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    samples = []

    def f(t):
        d = distance_fn(t)
        samples.append((t, d))
        return d - epsilon

    f_lo = f(0.0)
    if f_lo <= 0:
        return TTSSRecord(time=0.0, epsilon=epsilon, residual=abs(f_lo),
                          evaluations=len(samples),
                          notes="already below threshold at t=0")
    t_lo = 0.0
    t = t_hint if (t_hint is not None and t_hint > 0) else 1.0
    # Exponential sweep: shrink first if the hint overshot, then grow.
    ft = f(t)
    while ft <= 0 and t > 1e-12:
        t_hi, f_hi = t, ft
        t /= bracket_factor
        ft = f(t)
        if len(samples) > max_evals:
            break
    if ft <= 0:
        t_hi, f_hi = t, ft  # below threshold all the way down to ~0
    else:
        t_lo, f_lo = t, ft
        while True:
            t *= bracket_factor
            ft = f(t)
            if ft <= 0:
                t_hi, f_hi = t, ft
                break
            t_lo, f_lo = t, ft
            if t > t_max:
                return TTSSRecord(time=t, epsilon=epsilon, residual=abs(ft),
                                  evaluations=len(samples), timed_out=True,
                                  non_monotone=_observed_non_monotone(samples),
                                  notes=f"no crossing below t_max={t_max:g}")
            if len(samples) > max_evals:
                return TTSSRecord(time=t, epsilon=epsilon, residual=abs(ft),
                                  evaluations=len(samples), timed_out=True,
                                  non_monotone=_observed_non_monotone(samples),
                                  notes="evaluation budget exhausted in sweep")
    # Safeguarded secant inside [t_lo, t_hi]; converge both the distance
    # residual and the bracket width (relative in t).
    ta, fa, tb, fb = t_lo, f_lo, t_hi, f_hi
    t_best, f_best = tb, fb
    while ((abs(f_best) > rel_residual * epsilon or tb - ta > rel_time * tb)
           and len(samples) < max_evals):
        if fa > 0 > fb:
            t_new = ta + fa * (tb - ta) / (fa - fb)
        else:
            t_new = 0.5 * (ta + tb)
        if not (min(ta, tb) < t_new < max(ta, tb)):
            t_new = 0.5 * (ta + tb)
        f_new = f(t_new)
        if abs(f_new) < abs(f_best):
            t_best, f_best = t_new, f_new
        if f_new > 0:
            ta, fa = t_new, f_new
        else:
            tb, fb = t_new, f_new
        if tb - ta <= 1e-14 * max(1.0, tb):
            break
    if abs(f_best) > rel_residual * epsilon:
        warnings.warn(f"TTSS residual {abs(f_best):.3g} above target "
                      f"{rel_residual * epsilon:.3g}", RuntimeWarning)
    return TTSSRecord(time=t_best, epsilon=epsilon, residual=abs(f_best),
                      evaluations=len(samples),
                      non_monotone=_observed_non_monotone(samples))


def ttss_relax(L: Liouvillian, rho0: np.ndarray, epsilon: float,
               steady: np.ndarray | None = None, t_hint: float | None = None,
               bracket_factor: float = 2.0, timeout_factor: float = 1e8,
               **kwargs) -> TTSSRecord:
    """TTSS for relaxation under the fixed generator from rho0."""
    if steady is None:
        steady = spectral.steady_state(L)

    def dist(t):
        if t == 0.0:
            return trace_norm_distance(rho0, steady)
        return trace_norm_distance(propagate_relax(L, rho0, t), steady)

    gap = spectral.gap_relax(L)
    t_max = timeout_factor / gap
    if t_hint is None:
        d0 = trace_norm_distance(rho0, steady)
        if d0 > epsilon:
            t_hint = math.log(d0 / epsilon) / gap
    return solve_ttss(dist, epsilon, t_hint=t_hint, t_max=t_max,
                      bracket_factor=bracket_factor, **kwargs)


def ttss_adia(schedule: Schedule, epsilon: float, target: np.ndarray | None = None,
              t_hint: float | None = None, bracket_factor: float = 2.0,
              timeout_tau: float = 1e12, rtol: float = 1e-9, atol: float = 1e-12,
              **kwargs) -> TTSSRecord:
    """TTSS over total run time tau for the interpolated schedule.

    The distance is measured at s=1 against the final steady state; each
    probe is a full adaptive integration of the schedule retimed to tau.
    """
    if target is None:
        target = schedule.steady_state_at(1.0)

    def dist(tau):
        if tau == 0.0:
            return trace_norm_distance(schedule.initial_state, target)
        traj = propagate_adiabatic(schedule.with_tau(tau), rtol=rtol, atol=atol,
                                   sample_count=2)
        return trace_norm_distance(traj.final_state, target)

    return solve_ttss(dist, epsilon, t_hint=t_hint, t_max=timeout_tau,
                      bracket_factor=bracket_factor, **kwargs)


def ttss_instantaneous(schedule: Schedule, epsilon: float,
                       t_hint: float | None = None, bracket_factor: float = 2.0,
                       timeout_tau: float = 1e12, rtol: float = 1e-9,
                       atol: float = 1e-12, sample_count: int = 401,
                       **kwargs) -> TTSSRecord:
    """TTSS under the uniform-in-s criterion: max_s d(rho(s*tau), ss(s)) <= eps.

    Stricter than the endpoint criterion, so the returned time dominates the
    one from ``ttss_adia`` for the same schedule and epsilon.  The max is
    taken over ``sample_count`` equally spaced samples of each probe run; the
    instantaneous steady states are cached on the schedule, so repeated
    probes only pay for the integration.
    """

    def dist(tau):
        if tau == 0.0:
            rho0 = schedule.initial_state
            return max(trace_norm_distance(rho0, schedule.steady_state_at(s))
                       for s in np.linspace(0.0, 1.0, sample_count))
        traj = propagate_adiabatic(schedule.with_tau(tau), rtol=rtol, atol=atol,
                                   sample_count=sample_count)
        return float(np.max(traj.tnd_to_instantaneous_ss))

    return solve_ttss(dist, epsilon, t_hint=t_hint, t_max=timeout_tau,
                      bracket_factor=bracket_factor, **kwargs)


TTSS_CSV_HEADER = "model,n,g,beta,epsilon,method,tau,iterations,flags"


def record_csv_row(record: TTSSRecord, model: str, n: int, g: float,
                   beta: float, method: str) -> str:
    """Serialize one record in the shared TTSS table layout."""
    flags = ";".join(name for name, on in
                     (("non_monotone", record.non_monotone),
                      ("timed_out", record.timed_out)) if on)
    return (f"{model},{n},{g:.12g},{beta:.12g},{record.epsilon:.12g},"
            f"{method},{record.time:.12g},{record.evaluations},{flags}")


def estimate_relax(gap: float, epsilon: float, amplitude: float = 1.0) -> ScalingEstimate:
    """ln(A / eps) / gap estimate for relaxation."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    return ScalingEstimate(time=math.log(max(amplitude / epsilon, 1.0)) / gap,
                           gap=gap, amplitude=amplitude, kind="relax")


def estimate_adia(bound_total: float, epsilon: float,
                  gap: float = float("nan")) -> ScalingEstimate:
    """B / eps estimate for the adiabatic protocol (bound_total at tau=1)."""
    return ScalingEstimate(time=bound_total / epsilon, gap=gap,
                           amplitude=bound_total, kind="adiabatic")


def fit_power_law(x, y):
    """Least-squares fit y = c * x**p on ln-ln axes.

    Returns (p, c, r_squared).  Points must be positive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (p, lnc), res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        ss_res = float(res[0]) if res.size else float(np.sum((A @ [p, lnc] - ly) ** 2))
        r2 = 1.0 - ss_res / ss_tot
    return float(p), float(np.exp(lnc)), r2
