"""Named experiments that regenerate the figure and table data.

Each recipe writes CSV files and a ``summary.txt`` into its own directory
and returns the list of :class:`Check` results bound to it. Every number
is a function of ``(recipe, seed, overrides)`` only, so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import abm, kinetic, limits, meanfield
from .core import DEFAULT_SEED, InteractionKernel, ModelParams, total_variation

__all__ = ["Check", "RECIPES", "run_recipe", "write_csv", "fmt"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def fmt(x) -> str:
    """Shortest round-tripping text for numbers; ``str`` for the rest."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _options(defaults: dict, overrides: dict) -> dict:
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ValueError(f"unknown override(s) {sorted(unknown)}; valid: {sorted(defaults)}")
    opts = dict(defaults)
    for k, v in overrides.items():
        opts[k] = type(defaults[k])(v)
    return opts


def _abm_histogram(job):
    p, steps, stride = job
    res = abm.run(p, steps, record_stride=stride)
    centers, mass = abm.u_histogram(res.series)
    return res, centers, mass


def fig1_transition(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Histograms of ``u`` for ``N = 5, 7, 12`` with a top-hat kernel of radius 0.2."""
    o = _options({"steps": 100_000, "gamma0": 0.2, "b": 1.0, "sigma": 0.2}, overrides)
    sizes = (5, 7, 12)
    kernel = InteractionKernel.tophat(o["sigma"])
    jobs = [(ModelParams(o["gamma0"], o["b"], n, 0.01, kernel, seed), o["steps"], 1) for n in sizes]
    results = _map(_abm_histogram, jobs, workers)
    bimodal = {}
    for n, (res, centers, mass) in zip(sizes, results):
        s = res.series
        write_csv(out / f"u_series_N{n}.csv", ("time", "u"), zip(s.times[::10], s.u[::10]))
        write_csv(out / f"histogram_N{n}.csv", ("bin_center", "probability_mass"), zip(centers, mass))
        bimodal[n] = abm.is_bimodal(centers, mass)
    return [
        Check("no preferred state at N=5", not bimodal[5], f"bimodal={bimodal[5]}"),
        Check("two ordered states at N=12", bimodal[12], f"bimodal={bimodal[12]} (N=7: {bimodal[7]})"),
    ]


def fig2_noise_regimes(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Agent histograms against the stationary Fokker-Planck density, large and small noise."""
    o = _options({"steps": 100_000, "n_agents": 20, "b": 1.0, "tv_bound": 0.08}, overrides)
    settings = (("large_noise", 1.3, False), ("small_noise", 0.3, True))
    jobs = [(ModelParams(g, o["b"], o["n_agents"], 0.01, InteractionKernel.global_(), seed), o["steps"], 1) for _, g, _ in settings]
    results = _map(_abm_histogram, jobs, workers)
    checks = []
    for (label, g, want_bimodal), job, (res, centers, mass) in zip(settings, jobs, results):
        p = job[0]
        dens = meanfield.stationary_density(p)
        _, ps_mass = meanfield.lattice_bin_masses(p)
        tv = total_variation(mass, ps_mass)
        bim = abm.is_bimodal(centers, mass)
        write_csv(out / f"histogram_{label}.csv", ("bin_center", "probability_mass"), zip(centers, mass))
        write_csv(out / f"ps_bins_{label}.csv", ("bin_center", "probability_mass"), zip(centers, ps_mass))
        # density per unit u scaled to lattice bins of width 2/N
        write_csv(out / f"ps_curve_{label}.csv", ("u", "density", "scaled_mass"), zip(dens.u, dens.density, dens.density * 2.0 / p.n_agents))
        checks.append(Check(f"{label} (gamma0={g}) histogram vs p_s", tv <= o["tv_bound"], f"TV={tv:.4f} (bound {o['tv_bound']})"))
        shape = "bimodal" if want_bimodal else "unimodal"
        checks.append(Check(f"{label} (gamma0={g}) histogram is {shape}", bim == want_bimodal, f"bimodal={bim}"))
    return checks


def _kinetic_outputs(out: Path, sol: kinetic.KineticSolution, closure, p):
    for t, f in sorted(sol.snapshots.items()):
        if closure.kind in ("nonlocal", "regularized", "dirac"):
            u = kinetic.mean_velocity_field(f, closure, p)
        else:
            u, _ = kinetic.velocity_moments(f, closure, p)
        write_csv(
            out / f"snapshot_t{t:g}.csv",
            ("x", "p_plus", "p_minus", "rho", "j", "u"),
            zip(f.x, f.p_plus, f.p_minus, f.rho, f.j, u),
        )
    write_csv(out / "diagnostics.csv", ("time", "mass", "l2_j", "l2_rho"), zip(sol.times, sol.mass, sol.l2_j, sol.l2_rho))


def fig3_nonlocal_longtime(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Nonlocal kinetic model with a top-hat kernel, run to ``t = 25``."""
    o = _options({"grid": 400, "T": 25.0, "gamma0": 0.3, "b": 1.0, "sigma": 0.2}, overrides)
    kernel = InteractionKernel.tophat(o["sigma"])
    p = ModelParams(o["gamma0"], o["b"], 20, 0.01, kernel, seed)
    closure = kinetic.ClosureModel.nonlocal_(kernel)
    f0 = kinetic.fig3_initial_data(o["grid"])
    dt = f0.dx
    snaps = sorted({0.0, 1.0, 5.0, 10.0, o["T"]})
    sol = kinetic.solve(f0, closure, p, o["T"], dt, snapshots=[t for t in snaps if t <= o["T"]])
    _kinetic_outputs(out, sol, closure, p)
    f = sol.final
    dev = float(np.abs(f.rho - 1.0).max())
    spread = float(f.j.max() - f.j.min())
    drift = float(np.abs(sol.mass / sol.mass[0] - 1.0).max())
    return [
        Check(f"density flat at t={o['T']:g}", dev <= 0.05, f"max|rho-1|={dev:.3e}"),
        Check(f"flux flat at t={o['T']:g}", spread <= 0.05, f"max j - min j={spread:.3e}"),
        Check("mass conserved", drift <= 1e-12, f"max relative drift={drift:.2e}"),
    ]


def fig4_dirac_longtime(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Local (Dirac) closure run to ``t = 15`` and compared with the travelling-wave relations."""
    o = _options({"grid": 400, "T": 15.0, "gamma0": 0.3, "b": 1.0, "tol": 0.05}, overrides)
    p = ModelParams(o["gamma0"], o["b"], 20, 0.01, InteractionKernel.global_(), seed)
    closure = kinetic.ClosureModel.dirac()
    f0 = kinetic.fig3_initial_data(o["grid"])
    sol = kinetic.solve(f0, closure, p, o["T"], f0.dx, snapshots=sorted({0.0, 5.0, 10.0, o["T"]}))
    _kinetic_outputs(out, sol, closure, p)
    rep = kinetic.traveling_wave_check(sol.final, p)
    rows = [(k, getattr(rep, k)) for k in ("in_regime", "u_s", "constant_component", "p_const", "plateau_low", "plateau_high", "product_residual", "ratio_residual")]
    write_csv(out / "travelling_wave.csv", ("quantity", "value"), rows)
    if not rep.in_regime:
        return [Check("travelling wave detected", False, rep.message)]
    return [
        Check("plateau product relation", rep.product_residual <= o["tol"], f"residual={rep.product_residual:.4f}"),
        Check("plateau ratio relation", rep.ratio_residual <= o["tol"], f"residual={rep.ratio_residual:.2e} (u_s={rep.u_s:.4f})"),
    ]


def switching_time_table(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Kramers estimate, exact chain passage time and observed agent switching time."""
    o = _options({"steps": 1_000_000, "n_agents": 20, "gamma0": 0.3, "b": 1.0, "threshold": 0.8}, overrides)
    p = ModelParams(o["gamma0"], o["b"], o["n_agents"], 0.01, InteractionKernel.global_(), seed)
    tau_k = meanfield.kramers_time(p)
    n = p.n_agents
    r0, r1 = meanfield.nearest_lattice_state(-0.9, n), meanfield.nearest_lattice_state(0.9, n)
    tau_x = meanfield.master_equation_mfpt(p, r0, r1)
    res = abm.run(p, o["steps"])
    rec = abm.switching_times(res.series, o["threshold"])
    write_csv(out / "durations.csv", ("duration",), ((d,) for d in rec.durations))
    write_csv(
        out / "switching_times.csv",
        ("tau_kramers", "tau_exact", "tau_observed", "stderr", "transitions"),
        [(tau_k, tau_x, rec.mean, rec.stderr, rec.count)],
    )
    us = meanfield.ordered_state(p)
    prof = meanfield.potential_profile(p)
    cell = prof.u[1] - prof.u[0]
    neg = prof.u < 0
    argmin = abs(float(prof.u[neg][np.argmin(prof.phi[neg])]))
    obs_ok = rec.count >= 150 and abs(rec.mean - 58.8) <= 0.25 * 58.8
    return [
        Check("Kramers estimate 61.1 +- 0.5", abs(tau_k - 61.1) <= 0.5, f"tau_Kramers={tau_k:.3f}"),
        Check(
            "observed switching time within 25% of 58.8",
            obs_ok,
            f"mean={rec.mean:.2f} +- {rec.stderr:.2f} over {rec.count} transitions",
        ),
        Check(
            "exact passage time vs observed (3 se)",
            abs(tau_x - rec.mean) <= 3.0 * rec.stderr,
            f"tau_exact({r0}->{r1})={tau_x:.3f}, observed={rec.mean:.2f} +- {rec.stderr:.2f}",
        ),
        Check("ordered state 0.8944 +- 1e-4", abs(us - 0.8944) <= 1e-4, f"u_s={us:.6f}"),
        Check("potential argmin at u_s", abs(argmin - us) <= cell, f"argmin={argmin:.5f}, cell={cell:.0e}"),
    ]


def handset_population(M: int = 400) -> limits.SampledPopulation:
    """Nonuniform test population with a strongly polarized flux."""
    return limits.SampledPopulation.from_functions(
        lambda x: 1.0 + 0.5 * np.cos(2.0 * np.pi * x),
        lambda x: (1.0 + 0.5 * np.cos(2.0 * np.pi * x)) * (0.7 + 0.2 * np.sin(2.0 * np.pi * x)),
        M,
    )


def chaos_tables(out: Path, seed: int, workers: int, overrides: dict) -> list[Check]:
    """Monte Carlo window averages against their limits, fixed and shrinking windows."""
    o = _options({"replicates": 10_000, "n_max": 10_000, "z": 0.3, "sigma": 0.2}, overrides)
    reps, n_max = o["replicates"], o["n_max"]
    n_list = [n for n in (100, 1000, 10_000) if n < n_max] + [n_max]
    pop = handset_population()
    kernel = InteractionKernel.tophat(o["sigma"])
    q_lim = limits.qn_limit(pop, kernel, o["z"])
    rows = []
    for n in n_list:
        q = limits.mc_QN(pop, kernel, n, o["z"], reps, seed, workers)
        r = limits.mc_RN(pop, kernel, n, o["z"], reps, seed, workers)
        rows.append((n, q, r))
    write_csv(
        out / "lemma_table.csv",
        ("N", "Q_estimate", "Q_stderr", "Q_limit", "R_estimate", "R_stderr", "R_limit"),
        [(n, q.mean, q.stderr, q_lim, r.mean, r.stderr, q_lim**2) for n, q, r in rows],
    )
    _, q, r = rows[-1]
    gap = r.mean - q.mean**2
    gap_se = math.hypot(r.stderr, 2.0 * q.mean * q.stderr)
    checks = [
        Check(f"Q_N at N={n_max} vs limit (3 se)", q.within(q_lim), f"{q.mean:.5f} +- {q.stderr:.1e} vs {q_lim:.5f}"),
        Check(f"R_N at N={n_max} vs limit (3 se)", r.within(q_lim**2), f"{r.mean:.5f} +- {r.stderr:.1e} vs {q_lim**2:.5f}"),
        Check(f"R_N - Q_N^2 at N={n_max} vanishes (3 se)", abs(gap) <= 3.0 * gap_se, f"{gap:.2e} +- {gap_se:.1e}"),
    ]
    uniform = limits.SampledPopulation.uniform(0.4)
    shrink_rows = []
    for alpha in (0.5, 1.0, 2.0):
        for row in limits.mc_shrink_limits(uniform, alpha, n_list, 0.5, reps, seed, workers):
            shrink_rows.append(row)
            if row.n_agents == n_max:
                for name, est, lim in (("Q", row.q, row.q_limit), ("R", row.r, row.r_limit)):
                    checks.append(
                        Check(
                            f"shrinking window alpha={alpha:g}: {name}_N at N={n_max} vs limit (3 se)",
                            est.within(lim),
                            f"{est.mean:.5f} +- {est.stderr:.1e} vs {lim:.5f}",
                        )
                    )
    write_csv(
        out / "shrink_table.csv",
        ("alpha", "N", "Q_estimate", "Q_stderr", "Q_limit", "Q_finite_N", "R_estimate", "R_stderr", "R_limit", "R_finite_N"),
        [(r.alpha, r.n_agents, r.q.mean, r.q.stderr, r.q_limit, r.q_finite, r.r.mean, r.r.stderr, r.r_limit, r.r_finite) for r in shrink_rows],
    )
    return checks


RECIPES = {
    "fig1_transition": fig1_transition,
    "fig2_noise_regimes": fig2_noise_regimes,
    "fig3_nonlocal_longtime": fig3_nonlocal_longtime,
    "fig4_dirac_longtime": fig4_dirac_longtime,
    "switching_time_table": switching_time_table,
    "chaos_tables": chaos_tables,
}


def run_recipe(name: str, out_dir, seed: int = DEFAULT_SEED, workers: int = 1, overrides: dict | None = None, force: bool = False):
    """Run one recipe into ``out_dir/name``; returns its checks.

    An existing non-empty output directory is an error unless ``force``.
    """
    if name not in RECIPES:
        raise ValueError(f"unknown recipe {name!r}; valid: {', '.join(RECIPES)}")
    out = Path(out_dir) / name
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        checks = RECIPES[name](out, seed, workers, dict(overrides or {}))
    lines = [f"recipe {name} seed {seed}"] + [c.line() for c in checks]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return checks
