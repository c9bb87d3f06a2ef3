"""Command-line entry point ``swarmkin``.

Exit status is 0 on success, 1 when a recipe ran but one of its checks
failed, and 2 on invalid input or a module error.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import abm, kinetic, limits, meanfield, recipes
from .core import DEFAULT_SEED, InteractionKernel, ModelParams, load_config, validate_params

__all__ = ["main", "build_parser", "sweep", "SWEEP_AXES", "SWEEP_METRICS"]

SWEEP_AXES = ("gamma0", "b", "n_agents", "dt")
SWEEP_METRICS = ("u_s", "curvature", "kramers_time", "ln_kramers", "tau_exact", "kramers_ratio", "abm_switching_time")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="parameter file (key = value lines)")
    parser.add_argument("--seed", type=int, default=d(None), help="override the seed")
    parser.add_argument("--out-dir", default=d("."), help="directory for relative output paths")
    parser.add_argument("--workers", type=int, default=d(1), help="parallel worker processes")
    parser.add_argument("--force", action="store_true", default=d(False), help="allow overwriting outputs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarmkin", description="Velocity-jump swarm model: agents, mean field and kinetic limits.")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-abm", help="run the agent model and record the mean velocity")
    _global_flags(s, suppress=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--record-u", type=int, default=1, metavar="STRIDE")
    s.add_argument("--out", required=True, help="CSV of time,u")
    s.add_argument("--hist", help="CSV of bin_center,probability_mass")
    s.add_argument("--threshold", type=float, default=0.8, help="switching threshold for the summary")
    s.add_argument("--replicate", type=int, default=0)

    s = sub.add_parser("analyze-fp", help="mean-field regime, ordered state and switching times")
    _global_flags(s, suppress=True)
    s.add_argument("--out", required=True, help="CSV of quantity,value")
    s.add_argument("--density-out", help="CSV of u,density (default: <out>_density.csv)")
    s.add_argument("--grid", type=int, default=2001)

    s = sub.add_parser("solve-kinetic", help="solve the two-speed kinetic system")
    _global_flags(s, suppress=True)
    s.add_argument("--closure", default="nonlocal", help="nonlocal|regularized:<eps>|dirac|alpha1|telegraph")
    s.add_argument("--grid", type=int, default=400)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float, help="time step (default: cell width)")
    s.add_argument("--snapshots", default="", help="comma-separated times")
    s.add_argument("--initial", choices=("fig3", "isotropic"), default="fig3")
    s.add_argument("--out-prefix", required=True)

    s = sub.add_parser("chaos-check", help="Monte Carlo window averages against their limits")
    _global_flags(s, suppress=True)
    s.add_argument("--mode", default="qn", help="qn|rn|shrink:<alpha>")
    s.add_argument("--moment", choices=("q", "r"), default="q", help="moment reported in shrink mode")
    s.add_argument("--N-list", dest="n_list", default="100,1000,10000")
    s.add_argument("--replicates", type=int, default=10_000)
    s.add_argument("--z", type=float, default=None, help="probe point")
    s.add_argument("--population", default="handset", help="handset|uniform:<j>")
    s.add_argument("--out", required=True)

    s = sub.add_parser("recipe", help="regenerate one figure or table")
    _global_flags(s, suppress=True)
    s.add_argument("name", choices=sorted(recipes.RECIPES))
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="recipe override")

    s = sub.add_parser("sweep", help="scan one parameter and tabulate metrics")
    _global_flags(s, suppress=True)
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--metrics", default="u_s,curvature,kramers_time,ln_kramers,tau_exact")
    s.add_argument("--fixed-ratio", action="store_true", help="when scanning gamma0, keep b/gamma0 fixed")
    s.add_argument("--steps", type=int, default=1_000_000, help="agent steps for abm_switching_time")
    s.add_argument("--out", required=True)
    return ap


def _params(args) -> ModelParams:
    if args.config is None:
        raise ValueError("--config is required for this command")
    p = load_config(args.config)
    if args.seed is not None:
        p = p.replace(seed=args.seed)
    return validate_params(p)


def _out_path(args, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = Path(args.out_dir) / path
    if path.exists() and not args.force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _floats(text: str) -> list[float]:
    vals = [v for v in (s.strip() for s in text.split(",")) if v]
    return [float(v) for v in vals]


def cmd_simulate_abm(args) -> int:
    p = _params(args)
    out = _out_path(args, args.out)
    hist = _out_path(args, args.hist) if args.hist else None
    res = abm.run(p, args.steps, record_stride=args.record_u, replicate=args.replicate)
    recipes.write_csv(out, ("time", "u"), zip(res.series.times, res.series.u))
    if hist is not None:
        centers, mass = abm.u_histogram(res.series)
        recipes.write_csv(hist, ("bin_center", "probability_mass"), zip(centers, mass))
    rec = abm.switching_times(res.series, args.threshold)
    print(f"steps={args.steps} switches={res.n_switches} transitions={rec.count} mean_switching_time={rec.mean:.4g} stderr={rec.stderr:.3g}")
    return 0


def _fp_summary(p: ModelParams) -> list[tuple[str, object]]:
    reg = meanfield.regime(p)
    rows = [("regime", reg), ("curvature_at_zero", meanfield.curvature_at_zero(p))]
    us = meanfield.ordered_state(p) if reg == meanfield.SMALL_NOISE else None
    rows.append(("u_s", "" if us is None else us))
    if us is not None and us > 0.0:
        rows.append(("tau_kramers", meanfield.kramers_time(p)))
        target = min(us, 1.0)
        r0 = meanfield.nearest_lattice_state(-target, p.n_agents)
        r1 = meanfield.nearest_lattice_state(target, p.n_agents)
        rows.append(("tau_exact", meanfield.master_equation_mfpt(p, r0, r1) if r0 != r1 else ""))
    else:
        rows += [("tau_kramers", ""), ("tau_exact", "")]
    return rows


def cmd_analyze_fp(args) -> int:
    p = _params(args)
    out = _out_path(args, args.out)
    dens_name = args.density_out or str(Path(args.out).with_suffix("")) + "_density.csv"
    dens_path = _out_path(args, dens_name)
    rows = _fp_summary(p)
    recipes.write_csv(out, ("quantity", "value"), rows)
    dens = meanfield.stationary_density(p, args.grid)
    recipes.write_csv(dens_path, ("u", "density"), zip(dens.u, dens.density))
    for k, v in rows:
        print(f"{k} = {recipes.fmt(v)}")
    return 0


def cmd_solve_kinetic(args) -> int:
    p = _params(args)
    closure = kinetic.ClosureModel.from_string(args.closure, p.kernel)
    if args.initial == "fig3":
        f0 = kinetic.fig3_initial_data(args.grid)
    else:
        f0 = kinetic.KineticField(np.full(args.grid, 0.5), np.full(args.grid, 0.5))
    dt = args.dt if args.dt is not None else f0.dx
    snaps = _floats(args.snapshots)
    prefix = args.out_prefix
    paths = {t: _out_path(args, f"{prefix}_t{t:g}.csv") for t in snaps}
    diag_path = _out_path(args, f"{prefix}_diagnostics.csv")
    sol = kinetic.solve(f0, closure, p, args.T, dt, snapshots=snaps)
    for t, f in sol.snapshots.items():
        if closure.kind in ("nonlocal", "regularized", "dirac"):
            u = kinetic.mean_velocity_field(f, closure, p)
        else:
            u, _ = kinetic.velocity_moments(f, closure, p)
        recipes.write_csv(paths[t], ("x", "p_plus", "p_minus", "rho", "j", "u"), zip(f.x, f.p_plus, f.p_minus, f.rho, f.j, u))
    recipes.write_csv(diag_path, ("time", "mass", "l2_j", "l2_rho"), zip(sol.times, sol.mass, sol.l2_j, sol.l2_rho))
    f = sol.final
    print(f"t={f.time:g} mass={f.mass:.15g} l2_j={sol.l2_j[-1]:.6g} rho in [{f.rho.min():.6g}, {f.rho.max():.6g}]")
    return 0


def _population(text: str) -> limits.SampledPopulation:
    if text == "handset":
        return recipes.handset_population()
    name, _, arg = text.partition(":")
    if name == "uniform":
        return limits.SampledPopulation.uniform(float(arg or 0.0))
    raise ValueError(f"unknown population {text!r}; use handset or uniform:<j>")


def cmd_chaos_check(args) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    kernel = InteractionKernel.tophat(0.2)
    if args.config is not None:
        p = _params(args)
        kernel, seed = p.kernel, p.seed
    pop = _population(args.population)
    n_list = [int(v) for v in _floats(args.n_list)]
    if not n_list:
        raise ValueError("empty --N-list")
    out = _out_path(args, args.out)
    rows = []
    if args.mode in ("qn", "rn"):
        z = 0.3 if args.z is None else args.z
        lim = limits.qn_limit(pop, kernel, z)
        fn = limits.mc_QN if args.mode == "qn" else limits.mc_RN
        target = lim if args.mode == "qn" else lim * lim
        for n in n_list:
            est = fn(pop, kernel, n, z, args.replicates, seed, args.workers)
            rows.append((n, est.mean, est.stderr, target))
    elif args.mode.startswith("shrink:"):
        alpha = float(args.mode.split(":", 1)[1])
        z = 0.5 if args.z is None else args.z
        for row in limits.mc_shrink_limits(pop, alpha, n_list, z, args.replicates, seed, args.workers):
            est, lim = (row.q, row.q_limit) if args.moment == "q" else (row.r, row.r_limit)
            rows.append((row.n_agents, est.mean, est.stderr, lim))
    else:
        raise ValueError(f"unknown mode {args.mode!r}; use qn, rn or shrink:<alpha>")
    recipes.write_csv(out, ("N", "estimate", "stderr", "limit_value"), rows)
    for r in rows:
        print(f"N={r[0]} estimate={r[1]:.6f} stderr={r[2]:.2e} limit={r[3]:.6f}")
    return 0


def cmd_recipe(args) -> int:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not KEY=VALUE")
        overrides[key.strip()] = value.strip()
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    checks = recipes.run_recipe(args.name, args.out_dir, seed, args.workers, overrides, args.force)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def _cell_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _metric(name: str, p: ModelParams, steps: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if name == "u_s":
            us = meanfield.ordered_state(p)
            return math.nan if us is None else us
        if name == "curvature":
            return meanfield.curvature_at_zero(p)
        if name in ("kramers_time", "ln_kramers", "tau_exact", "kramers_ratio") and meanfield.regime(p) != meanfield.SMALL_NOISE:
            return math.nan
        if name == "kramers_time":
            return meanfield.kramers_time(p)
        if name == "ln_kramers":
            return math.log(meanfield.kramers_time(p))
        if name == "tau_exact":
            us = min(meanfield.ordered_state(p), 1.0)
            r0 = meanfield.nearest_lattice_state(-us, p.n_agents)
            r1 = meanfield.nearest_lattice_state(us, p.n_agents)
            return meanfield.master_equation_mfpt(p, r0, r1)
        if name == "kramers_ratio":
            # tau(N, gamma0, b) / tau(N, 1, b / gamma0)
            ref = p.replace(gamma0=1.0, b=p.b / p.gamma0)
            return meanfield.kramers_time(p) / meanfield.kramers_time(ref)
        if name == "abm_switching_time":
            return abm.switching_times(abm.run(p, steps).series).mean
    raise ValueError(f"unknown metric {name!r}; valid: {', '.join(SWEEP_METRICS)}")


def sweep(base: ModelParams, axis: str, values, metrics, fixed_ratio: bool = False, steps: int = 1_000_000):
    """Long-form rows ``(axis, axis_value, metric, value)``; cell ``k`` uses a seed derived from ``(seed, k)``."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("empty value list")
    metrics = list(metrics)
    bad = [m for m in metrics if m not in SWEEP_METRICS]
    if bad or not metrics:
        raise ValueError(f"unknown metric(s) {bad}; valid: {', '.join(SWEEP_METRICS)}")
    ratio = base.b / base.gamma0 if fixed_ratio else None
    if fixed_ratio and axis != "gamma0":
        raise ValueError("--fixed-ratio only applies to the gamma0 axis")
    rows = []
    for k, v in enumerate(values):
        change = {axis: int(v) if axis == "n_agents" else float(v), "seed": _cell_seed(base.seed, k)}
        if ratio is not None:
            change["b"] = ratio * float(v)
        p = validate_params(base.replace(**change))
        for m in metrics:
            rows.append((axis, change[axis], m, _metric(m, p, steps)))
    return rows


def cmd_sweep(args) -> int:
    p = _params(args)
    values = _floats(args.values)
    metrics = [m for m in (s.strip() for s in args.metrics.split(",")) if m]
    out = _out_path(args, args.out)
    rows = sweep(p, args.axis, values, metrics, args.fixed_ratio, args.steps)
    recipes.write_csv(out, ("axis", "axis_value", "metric", "value"), rows)
    if args.axis == "n_agents" and "ln_kramers" in metrics and len(values) >= 2:
        pts = np.array([(r[1], r[3]) for r in rows if r[2] == "ln_kramers" and np.isfinite(r[3])])
        if len(pts) >= 2:
            slope = np.polyfit(pts[:, 0], pts[:, 1], 1)[0]
            expected = meanfield.asymptotic_exponent(p) if 0.0 < p.gamma0 < p.b else math.nan
            print(f"ln tau_Kramers slope in N: {slope:.6f} (large-N exponent {expected:.6f})")
    print(f"wrote {len(rows)} rows to {out}")
    return 0


_COMMANDS = {
    "simulate-abm": cmd_simulate_abm,
    "analyze-fp": cmd_analyze_fp,
    "solve-kinetic": cmd_solve_kinetic,
    "chaos-check": cmd_chaos_check,
    "recipe": cmd_recipe,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("swarmkin: error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileExistsError, FileNotFoundError, RuntimeError) as exc:
        print(f"swarmkin: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
