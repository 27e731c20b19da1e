"""Experiment runners behind the command line.

Each runner takes the parsed config and returns an ExperimentResult with
deterministically sorted rows, a summary dict (fits, exclusions), and flag
columns for points whose solver did not converge.  Sweep points are pure
functions of their argument tuple, so parallel and serial execution give
identical output.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, bounds, spectral, ttss
from .config import ExperimentConfig
from .evolve import propagate_adiabatic, trace_norm_distance
from .models import (FermionModel, QubitModel, SpikeModel,
                     delta_adia_analytic, delta_relevant_analytic,
                     fermion_gap_adia, fermion_gap_relax, fermion_ttss_adia,
                     fermion_ttss_relax, qubit_schedule, spike_closed_system,
                     spike_schedule)
from .ttss import fit_power_law

__all__ = [
    "ExperimentResult", "EXPERIMENTS", "run_experiment", "fit_linear",
    "write_result",
]


@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    sort_keys: tuple = ()
    extra_flags: int = 0  # flagged results living in the summary, not rows

    @property
    def flagged_count(self) -> int:
        return self.extra_flags + sum(int(bool(r.get("flagged", 0)))
                                      for r in self.rows)

    def sorted_rows(self) -> list:
        if not self.sort_keys:
            return list(self.rows)
        return sorted(self.rows, key=lambda r: tuple(r.get(k, 0) for k in self.sort_keys))


def _map_points(fn, jobs, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def fit_linear(x, y):
    """Least-squares y = a*x + b.  Returns (a, b, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    A = np.vstack([x, np.ones_like(x)]).T
    (a, b), _, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(a), float(b), r2


def _note(*recs) -> str:
    parts = []
    for tag, rec in recs:
        bits = []
        if rec.non_monotone:
            bits.append("non-monotone")
        if rec.timed_out:
            bits.append("timed-out")
        if rec.notes:
            bits.append(rec.notes)
        if bits:
            parts.append(f"{tag}: " + " ".join(bits))
    return "; ".join(parts).replace(",", ";")


def _clean(rows, *cols, key="flagged"):
    """Rows with finite values in all cols and no failure flag."""
    out = []
    for r in rows:
        if r.get(key, 0):
            continue
        vals = [r.get(c) for c in cols]
        if all(v is not None and np.isfinite(v) for v in vals):
            out.append(r)
    return out


def _power_fit_block(rows, xcol, ycol):
    good = _clean(rows, xcol, ycol)
    block = {"x": xcol, "y": ycol, "points": len(good),
             "excluded": len(rows) - len(good)}
    if len(good) >= 2:
        p, c, r2 = fit_power_law([r[xcol] for r in good], [r[ycol] for r in good])
        block.update(exponent=p, prefactor=c, r_squared=r2)
    return block


# ---------------------------------------------------------------- fermion

def _fermion_point(args):
    (n, B, J, gam, rates, eps, s_grid, frame_steps) = args
    model = FermionModel(n=n, B=B, J=J, gamma_aniso=gam, bath_rates=rates)
    gap_r = fermion_gap_relax(model)
    gap_a, argmin_s = fermion_gap_adia(model, s_grid=s_grid)
    row = {"n": n, "gap_relax": gap_r, "gap_adia": gap_a, "argmin_s": argmin_s,
           "tau_relax": math.nan, "tau_adia": math.nan, "flagged": 0, "note": ""}
    try:
        rec_r = fermion_ttss_relax(model, eps)
        # the end-point relaxation time seeds the sweep near the right
        # decade; the hint only affects evaluation count, never the answer
        rec_a = fermion_ttss_adia(model, eps, steps=frame_steps,
                                  t_hint=1.0 / gap_r)
    except Exception as exc:  # solver failure becomes a flagged row
        row["flagged"] = 1
        row["note"] = f"error: {exc}".replace(",", ";")
        return row
    row["tau_relax"] = rec_r.time
    row["tau_adia"] = rec_a.time
    row["flagged"] = int(rec_r.timed_out or rec_a.timed_out)
    row["note"] = _note(("relax", rec_r), ("adia", rec_a))
    return row


def fermion_scaling(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    sizes = cfg.get_list("fermion", "sizes", int)
    rates = tuple(cfg.get_list("fermion", "rates", float))
    eps = cfg.get("fermion", "epsilon", float)
    jobs = [(n, cfg.get("fermion", "b_field", float),
             cfg.get("fermion", "j_coupling", float),
             cfg.get("fermion", "gamma_aniso", float), rates, eps,
             cfg.get("fermion", "s_grid", int),
             cfg.get("solver", "frame_steps", int)) for n in sorted(sizes)]
    rows = _map_points(_fermion_point, jobs, workers)
    res = ExperimentResult(
        name="fermion-scaling",
        columns=["n", "tau_relax", "tau_adia", "gap_relax", "gap_adia",
                 "argmin_s", "flagged", "note"],
        rows=rows, sort_keys=("n",))
    res.summary["epsilon"] = eps
    res.summary["fits"] = {
        "tau_relax_vs_n": _power_fit_block(rows, "n", "tau_relax"),
        "tau_adia_vs_n": _power_fit_block(rows, "n", "tau_adia"),
        "gap_relax_vs_n": _power_fit_block(rows, "n", "gap_relax"),
        "gap_adia_vs_n": _power_fit_block(rows, "n", "gap_adia"),
    }
    largest = sorted(rows, key=lambda r: r["n"])[-5:]
    res.summary["fits"]["tau_adia_vs_n_largest5"] = _power_fit_block(
        largest, "n", "tau_adia")
    return res


# ------------------------------------------------------------------ qubit

def _qubit_point(args):
    (g, T, ox, oz, eps, rtol, atol) = args
    model = QubitModel(omega_x=ox, omega_z=oz, g=g, beta=1.0 / T)
    row = {"g": g, "T": T, "tau_adia": math.nan, "tau_relax": math.nan,
           "ratio": math.nan, "log10_ratio": math.nan, "flagged": 0, "note": ""}
    try:
        schedule = qubit_schedule(model, 1.0)
        d_rel = delta_relevant_analytic(model)
        rec_a = ttss.ttss_adia(schedule, eps, rtol=rtol, atol=atol,
                               t_hint=1.0 / (eps * d_rel**2))
        L1 = schedule.generator_at(1.0)
        rho0 = np.eye(2, dtype=complex) / 2.0
        rec_r = ttss.ttss_relax(L1, rho0, eps,
                                steady=schedule.steady_state_at(1.0))
    except Exception as exc:
        row["flagged"] = 1
        row["note"] = f"error: {exc}".replace(",", ";")
        return row
    row["tau_adia"] = rec_a.time
    row["tau_relax"] = rec_r.time
    if rec_r.time > 0:
        row["ratio"] = rec_a.time / rec_r.time
        if row["ratio"] > 0:
            row["log10_ratio"] = math.log10(row["ratio"])
    row["flagged"] = int(rec_a.timed_out or rec_r.timed_out)
    row["note"] = _note(("adia", rec_a), ("relax", rec_r))
    return row


def qubit_plane(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    grid = cfg.get("qubit", "grid", int)
    gs = np.geomspace(cfg.get("qubit", "g_min", float),
                      cfg.get("qubit", "g_max", float), grid)
    Ts = np.geomspace(cfg.get("qubit", "t_min", float),
                      cfg.get("qubit", "t_max", float), grid)
    eps = cfg.get("qubit", "epsilon", float)
    ox = cfg.get("qubit", "omega_x", float)
    oz = cfg.get("qubit", "omega_z", float)
    rtol = cfg.get("solver", "ttss_rtol", float)
    atol = cfg.get("solver", "ttss_atol", float)
    jobs = [(float(g), float(T), ox, oz, eps, rtol, atol)
            for g in gs for T in Ts]
    rows = _map_points(_qubit_point, jobs, workers)
    res = ExperimentResult(
        name="qubit-plane",
        columns=["g", "T", "tau_adia", "tau_relax", "ratio", "log10_ratio",
                 "flagged", "note"],
        rows=rows, sort_keys=("g", "T"))
    res.summary["epsilon"] = eps
    good = _clean(rows, "log10_ratio")
    if good:
        res.summary["log10_ratio_range"] = [
            min(r["log10_ratio"] for r in good),
            max(r["log10_ratio"] for r in good)]
    return res


def _qubit_slope_point(args):
    (g, T, ox, oz, eps, rtol, atol) = args
    model = QubitModel(omega_x=ox, omega_z=oz, g=g, beta=1.0 / T)
    row = {"g": g, "T": T, "delta_adia": math.nan, "delta_relax": math.nan,
           "delta_relevant": math.nan, "tau_adia": math.nan,
           "tau_relax": math.nan, "flagged": 0, "note": ""}
    try:
        schedule = qubit_schedule(model, 1.0)
        row["delta_adia"] = delta_adia_analytic(model)
        row["delta_relevant"] = delta_relevant_analytic(model)
        L1 = schedule.generator_at(1.0)
        row["delta_relax"] = spectral.gap_relax(L1)
        rec_a = ttss.ttss_adia(schedule, eps, rtol=rtol, atol=atol,
                               t_hint=1.0 / (eps * row["delta_relevant"]**2))
        rec_r = ttss.ttss_relax(L1, np.eye(2, dtype=complex) / 2.0, eps,
                                steady=schedule.steady_state_at(1.0))
    except Exception as exc:
        row["flagged"] = 1
        row["note"] = f"error: {exc}".replace(",", ";")
        return row
    row["tau_adia"] = rec_a.time
    row["tau_relax"] = rec_r.time
    row["flagged"] = int(rec_a.timed_out or rec_r.timed_out)
    row["note"] = _note(("adia", rec_a), ("relax", rec_r))
    return row


def qubit_slopes(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    T = cfg.get("qubit", "slopes_t", float)
    gs = np.geomspace(cfg.get("qubit", "slopes_g_min", float),
                      cfg.get("qubit", "slopes_g_max", float),
                      cfg.get("qubit", "slopes_points", int))
    eps = cfg.get("qubit", "epsilon", float)
    jobs = [(float(g), T, cfg.get("qubit", "omega_x", float),
             cfg.get("qubit", "omega_z", float), eps,
             cfg.get("solver", "ttss_rtol", float),
             cfg.get("solver", "ttss_atol", float)) for g in gs]
    rows = _map_points(_qubit_slope_point, jobs, workers)
    res = ExperimentResult(
        name="qubit-slopes",
        columns=["g", "T", "delta_adia", "delta_relax", "delta_relevant",
                 "tau_adia", "tau_relax", "flagged", "note"],
        rows=rows, sort_keys=("g", "T"))
    res.summary["epsilon"] = eps
    res.summary["T"] = T
    res.summary["fits"] = {
        "tau_adia_vs_delta_relevant": _power_fit_block(
            rows, "delta_relevant", "tau_adia"),
        "tau_adia_vs_delta_adia": _power_fit_block(
            rows, "delta_adia", "tau_adia"),
        "tau_relax_vs_delta_relax": _power_fit_block(
            rows, "delta_relax", "tau_relax"),
    }
    return res


def crossing_scan(cfg: ExperimentConfig):
    """Coupling at which the two decaying-branch moduli cross (summary aid)."""
    from .models import crossing_coupling
    beta = cfg.get("qubit", "crossing_beta", float)
    return {"beta": beta, "g_cross": crossing_coupling(beta)}


# ------------------------------------------------------------------ spike

def _spike_point(args):
    (n, g, beta, eps, rtol, atol, gap_grid) = args
    model = SpikeModel(n=n, g=g, beta=beta)
    row = {"n": n, "beta": beta, "g": g, "tau_relax": math.nan,
           "tau_adia": math.nan, "gap_relax": math.nan, "gap_adia": math.nan,
           "argmin_s": math.nan, "gap_tau_product": math.nan,
           "flagged": 0, "note": ""}
    try:
        schedule = spike_schedule(model, 1.0)
        L1 = schedule.generator_at(1.0)
        row["gap_relax"] = spectral.gap_relax(L1)
        report = spectral.gap_adia(schedule, s_grid=gap_grid)
        row["gap_adia"] = report.delta_adia
        row["argmin_s"] = report.argmin_s_adia
        rho0 = np.eye(model.dim, dtype=complex) / model.dim
        rec_r = ttss.ttss_relax(L1, rho0, eps,
                                steady=schedule.steady_state_at(1.0))
        rec_a = ttss.ttss_adia(schedule, eps, rtol=rtol, atol=atol,
                               t_hint=1.0 / (eps * row["gap_adia"]))
    except Exception as exc:
        row["flagged"] = 1
        row["note"] = f"error: {exc}".replace(",", ";")
        return row
    row["tau_relax"] = rec_r.time
    row["tau_adia"] = rec_a.time
    row["gap_tau_product"] = row["gap_relax"] * rec_r.time
    row["flagged"] = int(rec_r.timed_out or rec_a.timed_out)
    row["note"] = _note(("relax", rec_r), ("adia", rec_a))
    return row


def spike_scaling(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    sizes = cfg.get_list("spike", "sizes", int)
    eps = cfg.get("spike", "epsilon", float)
    jobs = [(n, cfg.get("spike", "g", float), cfg.get("spike", "beta", float),
             eps, cfg.get("solver", "ttss_rtol", float),
             cfg.get("solver", "ttss_atol", float), 41) for n in sorted(sizes)]
    rows = _map_points(_spike_point, jobs, workers)
    res = ExperimentResult(
        name="spike-scaling",
        columns=["n", "beta", "g", "tau_relax", "tau_adia", "gap_relax",
                 "gap_adia", "argmin_s", "gap_tau_product", "flagged", "note"],
        rows=rows, sort_keys=("n",))
    res.summary["epsilon"] = eps
    good = _clean(rows, "n", "tau_relax")
    if len(good) >= 2:
        slope, intercept, r2 = fit_linear([r["n"] for r in good],
                                          [math.log(r["tau_relax"]) for r in good])
        res.summary["ln_tau_relax_vs_n"] = {
            "slope": slope, "intercept": intercept, "r_squared": r2,
            "points": len(good), "excluded": len(rows) - len(good)}
    res.summary["fits"] = {
        "gap_tau_product_vs_n": _power_fit_block(rows, "n", "gap_tau_product"),
        "tau_adia_vs_n": _power_fit_block(rows, "n", "tau_adia"),
    }
    good_a = _clean(rows, "tau_adia")
    taus = [r["tau_adia"] for r in sorted(good_a, key=lambda r: r["n"])]
    res.summary["tau_adia_strictly_decreasing"] = bool(
        len(taus) >= 2 and all(b < a for a, b in zip(taus, taus[1:])))
    return res


def _spike_inst_point(args):
    (n, g, beta, eps, s_grid, rtol, atol) = args
    model = SpikeModel(n=n, g=g, beta=beta)
    schedule = spike_schedule(model, 1.0)
    ham = schedule.hamiltonian_at
    nodes = np.linspace(0.0, 1.0, s_grid)
    rows = []
    for s in nodes:
        L = schedule.generator_at(float(s))
        es = spectral.eig_liouvillian(L)
        lam1 = complex("nan+nanj")
        try:
            lam_br = bounds.coherence_eigenvalues(
                L, _as_spec(ham(float(s))))
            lam1 = complex(lam_br[1])
        except spectral.BranchTrackingError:
            pass
        gap_inst = es.min_modulus_nonzero()
        spec_s = _as_spec(ham(float(s)))
        hp = schedule.hamiltonian_deriv(float(s))
        eps_lead = bounds.zero_T_eps(spec_s, hp, lam1)
        rows.append({"n": n, "s": float(s), "lambda1_re": lam1.real,
                     "lambda1_im": lam1.imag, "gap_inst": gap_inst,
                     "eps_leading": eps_lead, "flagged": 0, "note": ""})
    report = bounds.zero_T_report(schedule, s_grid=s_grid, variant="leading")
    rec = ttss.ttss_instantaneous(schedule, eps, rtol=rtol, atol=atol,
                                  sample_count=401,
                                  t_hint=max(report.B_int / eps, 1.0))
    est = report.B_int / eps
    info = {"n": n, "B_int_leading": report.B_int, "tau_eps": rec.time,
            "tau_estimate": est,
            "ratio": rec.time / est if est > 0 else math.nan,
            "flagged": int(rec.timed_out), "note": _note(("adia", rec))}
    return rows, info


def _as_spec(H):
    from .superop import HamiltonianSpec
    return H if isinstance(H, HamiltonianSpec) else HamiltonianSpec.from_matrix(H)


def spike_instantaneous(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    sizes = cfg.get_list("spike", "sizes", int)
    beta = cfg.get("spike", "instantaneous_beta", float)
    g = cfg.get("spike", "instantaneous_g", float)
    eps = cfg.get("spike", "epsilon", float)
    jobs = [(n, g, beta, eps, cfg.get("spike", "s_grid", int),
             cfg.get("solver", "ttss_rtol", float),
             cfg.get("solver", "ttss_atol", float)) for n in sorted(sizes)]
    results = _map_points(_spike_inst_point, jobs, workers)
    rows = [r for point_rows, _ in results for r in point_rows]
    infos = [info for _, info in results]
    res = ExperimentResult(
        name="spike-instantaneous",
        columns=["n", "s", "lambda1_re", "lambda1_im", "gap_inst",
                 "eps_leading", "flagged", "note"],
        rows=rows, sort_keys=("n", "s"))
    base = infos[0]["ratio"] if infos else math.nan
    for info in infos:
        info["ratio_vs_first"] = (info["ratio"] / base
                                  if base and math.isfinite(base) else math.nan)
    res.summary.update(beta=beta, g=g, epsilon=eps, tracking=infos)
    res.extra_flags = sum(int(i["flagged"]) for i in infos)
    return res


def _closed_spike_point(args):
    (n, eps, rtol, atol) = args
    model = SpikeModel(n=n)
    rec = ttss.solve_ttss(
        lambda tau: spike_closed_system(model, tau, rtol=rtol, atol=atol),
        eps, t_hint=float(n) ** 1.5, bracket_factor=1.25, t_max=1e7)
    return {"n": n, "tau": rec.time, "residual": rec.residual,
            "oscillatory": int(rec.non_monotone),
            "flagged": int(rec.timed_out), "note": _note(("closed", rec))}


def closed_spike(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Unitary-only spike preparation; TTSS against the final ground state.

    The overlap curve rings, so points routinely carry the oscillatory
    marker; the fitted time is the first bracketed crossing, which is the
    quantity the scaling fit needs.  Only timeouts count as failures.
    """
    sizes = cfg.get_list("spike", "sizes", int)
    eps = cfg.get("spike", "closed_epsilon", float)
    jobs = [(n, eps, 1e-10, 1e-12) for n in sorted(sizes)]
    rows = _map_points(_closed_spike_point, jobs, workers)
    res = ExperimentResult(
        name="closed-spike",
        columns=["n", "tau", "residual", "oscillatory", "flagged", "note"],
        rows=rows, sort_keys=("n",))
    res.summary["epsilon"] = eps
    res.summary["fits"] = {"tau_vs_n": _power_fit_block(rows, "n", "tau")}
    res.summary["oscillatory_points"] = sum(r["oscillatory"] for r in rows)
    return res


# ------------------------------------------------------------- bound checks

_BOUNDS_COLUMNS = ["kind", "model", "g", "T", "n", "beta", "tau", "tnd",
                   "bound_total", "bound_over_tau", "margin", "b_analytic",
                   "b_ratio", "eps_ratio_min", "eps_ratio_max", "sound",
                   "flagged", "note"]


def _blank_bounds_row():
    row = {c: math.nan for c in _BOUNDS_COLUMNS}
    row.update(kind="", model="", sound=1, flagged=0, note="")
    return row


def _soundness_rows(schedule, label_cols, decades, rtol, atol):
    report = spectral.gap_adia(schedule, s_grid=41)
    B = bounds.adiabatic_B(schedule).total
    target = schedule.steady_state_at(1.0)
    out = []
    for k in decades:
        tau = 10.0**k / report.delta_adia
        row = _blank_bounds_row()
        row.update(kind="soundness", tau=tau, bound_total=B,
                   bound_over_tau=B / tau, **label_cols)
        try:
            traj = propagate_adiabatic(schedule.with_tau(tau), rtol=rtol,
                                       atol=atol, sample_count=2)
            tnd = trace_norm_distance(traj.final_state, target)
            row.update(tnd=tnd, margin=B / tau - tnd,
                       sound=int(tnd <= B / tau))
        except Exception as exc:
            row.update(flagged=1, note=f"error: {exc}".replace(",", ";"))
        out.append(row)
    return out


def _bounds_qubit_point(args):
    (g, T, ox, oz, decades, rtol, atol) = args
    model = QubitModel(omega_x=ox, omega_z=oz, g=g, beta=1.0 / T)
    schedule = qubit_schedule(model, 1.0)
    return _soundness_rows(schedule, {"model": "qubit", "g": g, "T": T},
                           decades, rtol, atol)


def _bounds_spike_point(args):
    (n, g, beta, decades, rtol, atol) = args
    model = SpikeModel(n=n, g=g, beta=beta)
    schedule = spike_schedule(model, 1.0)
    return _soundness_rows(schedule, {"model": "spike", "n": n, "beta": beta,
                                      "g": g}, decades, rtol, atol)


def _bounds_zero_t_point(args):
    (g, beta, ox, oz) = args
    model = QubitModel(omega_x=ox, omega_z=oz, g=g, beta=beta)
    schedule = qubit_schedule(model, 1.0)
    row = _blank_bounds_row()
    row.update(kind="zero_t", model="qubit", g=g, beta=beta)
    try:
        rep = bounds.zero_T_report(schedule, variant="exact")
        num = bounds.adiabatic_B(schedule).total
        ratio = rep.eps_leading / rep.eps_exact
        row.update(bound_total=num, b_analytic=rep.total,
                   b_ratio=rep.total / num,
                   eps_ratio_min=float(np.nanmin(ratio)),
                   eps_ratio_max=float(np.nanmax(ratio)),
                   sound=int(abs(rep.total / num - 1.0) <= 0.1))
    except Exception as exc:
        row.update(flagged=1, note=f"error: {exc}".replace(",", ";"))
    return [row]


def bounds_check(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    gs = cfg.get_list("bounds", "qubit_g", float)
    Ts = cfg.get_list("bounds", "qubit_t", float)
    spike_sizes = cfg.get_list("bounds", "spike_sizes", int)
    decades = tuple(cfg.get_list("bounds", "tau_decades", int))
    zbeta = cfg.get("bounds", "zero_t_beta", float)
    ox = cfg.get("qubit", "omega_x", float)
    oz = cfg.get("qubit", "omega_z", float)
    rtol = cfg.get("solver", "rtol", float)
    atol = cfg.get("solver", "atol", float)
    qjobs = [(float(g), float(T), ox, oz, decades, rtol, atol)
             for g in gs for T in Ts]
    sjobs = [(n, cfg.get("spike", "g", float), cfg.get("spike", "beta", float),
              decades, rtol, atol) for n in sorted(spike_sizes)]
    zjobs = [(float(g), zbeta, ox, oz) for g in gs]
    chunks = (_map_points(_bounds_qubit_point, qjobs, workers)
              + _map_points(_bounds_spike_point, sjobs, workers)
              + _map_points(_bounds_zero_t_point, zjobs, workers))
    rows = [row for chunk in chunks for row in chunk]
    res = ExperimentResult(name="bounds-check", columns=list(_BOUNDS_COLUMNS),
                           rows=rows,
                           sort_keys=("kind", "model", "g", "T", "n", "tau"))
    sound_rows = [r for r in rows if r["kind"] == "soundness" and not r["flagged"]]
    res.summary["soundness"] = {
        "points": len(sound_rows),
        "violations": sum(1 for r in sound_rows if not r["sound"]),
        "min_margin": (min(r["margin"] for r in sound_rows)
                       if sound_rows else math.nan),
    }
    zrows = [r for r in rows if r["kind"] == "zero_t" and not r["flagged"]]
    res.summary["zero_t"] = {
        "beta": zbeta,
        "b_ratio": {f"g={r['g']:g}": r["b_ratio"] for r in zrows},
        "eps_ratio_range": ([min(r["eps_ratio_min"] for r in zrows),
                             max(r["eps_ratio_max"] for r in zrows)]
                            if zrows else []),
    }
    return res


EXPERIMENTS = {
    "fermion-scaling": fermion_scaling,
    "qubit-plane": qubit_plane,
    "qubit-slopes": qubit_slopes,
    "spike-scaling": spike_scaling,
    "spike-instantaneous": spike_instantaneous,
    "bounds-check": bounds_check,
    "closed-spike": closed_spike,
}


def run_experiment(name: str, cfg: ExperimentConfig,
                   workers: int = 1) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; "
                       f"choose from {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name](cfg, workers=workers)


# ------------------------------------------------------------------ output

def _fmt(value) -> str:
    if isinstance(value, str):
        return value.replace(",", ";")
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return f"{float(value):.12g}"


def result_csv_text(result: ExperimentResult, cfg: ExperimentConfig,
                    timestamp: str | None = None) -> str:
    params = " ".join(f"{sec}.{k}={v}"
                      for sec, kv in cfg.effective().items()
                      for k, v in kv.items())
    lines = [f"# experiment={result.name} config_hash={cfg.hash()} "
             f"version={__version__} "
             f"units=model-reference-energy(times-in-its-inverse) {params}"]
    if timestamp:
        lines.append(f"# created={timestamp}")
    lines.append(",".join(result.columns))
    for row in result.sorted_rows():
        lines.append(",".join(_fmt(row.get(c)) for c in result.columns))
    return "\n".join(lines) + "\n"


def write_result(result: ExperimentResult, cfg: ExperimentConfig,
                 out_dir: str, timestamp: str | None = None):
    import json
    import os
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{result.name}.csv")
    with open(csv_path, "w") as fh:
        fh.write(result_csv_text(result, cfg, timestamp=timestamp))
    summary = {"experiment": result.name, "config_hash": cfg.hash(),
               "version": __version__, "rows": len(result.rows),
               "flagged_rows": result.flagged_count}
    summary.update(result.summary)
    json_path = os.path.join(out_dir, f"{result.name}_summary.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return csv_path, json_path
