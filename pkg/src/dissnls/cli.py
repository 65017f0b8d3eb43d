"""Command-line entry point: ``dissnls <command> ...``.

Exit status: 0 all checks pass, 1 some check failed, 2 usage or config
error, 3 no failures but some verdicts unreliable (boundary contamination).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, analysis, inequalities, profiles, theory
from . import _kernels
from .config import ConfigError, RunConfig, load_config, parse_profile
from .solver import DiagnosticsCSV, SolverConfig, evolve, galilean_selftest, read_diagnostics_csv
from .types import DomainError, Grid, ModelParams, NonFiniteError, as_fraction, classify_regime

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNRELIABLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_lambda(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot parse lambda {text!r}; use e.g. -1-1i") from None


def parse_p(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse p {text!r}; use 'a/b' or a terminating decimal") from None


def _dump(obj, path):
    if path:
        Path(path).write_text(json.dumps(obj, indent=2, default=str) + "\n")


def exit_status(statuses) -> int:
    statuses = list(statuses)
    if any(s == "FAIL" for s in statuses):
        return EXIT_FAIL
    if any(s == "UNRELIABLE" for s in statuses):
        return EXIT_UNRELIABLE
    return EXIT_OK


# --- theory commands -------------------------------------------------------------

def cmd_regime(args) -> int:
    lam = parse_lambda(args.lam)
    params = ModelParams.from_complex(args.d, parse_p(args.p), lam)
    rep = classify_regime(params)
    print(f"d = {params.d}, p = {params.p}, lambda = {lam.real:g}{lam.imag:+g}i")
    flags = ("dissipative", "attractive", "repulsive", "strong_dissipative")
    for name in flags:
        print(f"  {name:<20} {getattr(rep, name)}")
    for name, pos in rep.positions.items():
        print(f"  p vs {name:<15} {pos}")
    labels = [n for n in flags if getattr(rep, n)]
    print("regime: " + (", ".join(labels) if labels else "none"))
    _dump({"params": {"d": params.d, "p": str(params.p), "lambda": [lam.real, lam.imag]},
           **rep.as_dict()}, args.json)
    return EXIT_OK


def _rates_table(d: int, p: Fraction) -> dict:
    out = {}
    for th in theory.Theorem:
        try:
            r = theory.decay_exponent(d, p, th)
            out[th.value] = {"kind": r.kind, "exponent": str(r.exponent), "float": float(r.exponent)}
        except DomainError as exc:
            out[th.value] = {"error": str(exc)}
    return out


def cmd_rates(args) -> int:
    p = parse_p(args.p)
    table = _rates_table(args.d, p)
    if args.theorem:
        th = theory.Theorem.parse(args.theorem)
        entry = table[th.value]
        if "error" in entry:
            print(entry["error"], file=sys.stderr)
            return EXIT_USAGE
        table = {th.value: entry}
    print(f"L2 decay laws for d = {args.d}, p = {p}")
    for name, e in table.items():
        if "error" in e:
            print(f"  {name:<9} n/a ({e['error']})")
        else:
            print(f"  {name:<9} {e['kind']:<5} {e['exponent']}  (~{e['float']:.6g})")
    _dump({"d": args.d, "p": str(p), "rates": table}, args.json)
    return EXIT_OK


def cmd_recurrence(args) -> int:
    p = parse_p(args.p)
    try:
        res, stages, final = theory.iteration_stages(args.d, p)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"recurrence a_(n+1) = r a_n + q, a_1 = 1/2, d = {args.d}, p = {p}")
    print(f"r={res.r} q={res.q_rec} a_inf={res.a_inf} n0={res.n0}")
    print("  n  a_n                 decay exponent")
    for s in stages[:50]:
        print(f"  {s.n:<3}{str(s.a_n):<20}{s.decay}")
    if len(stages) > 50:
        print(f"  ... ({res.n0} stages in total)")
    print(f"  final (bounded gradient): {final.kind} {final.exponent}")
    _dump({"d": args.d, "p": str(p), "r": str(res.r), "q": str(res.q_rec), "a_inf": str(res.a_inf),
           "n0": res.n0,
           "stages": [{"n": s.n, "a_n": str(s.a_n), "decay": str(s.decay)} for s in stages[:1000]],
           "final": {"kind": final.kind, "exponent": str(final.exponent)}}, args.json)
    return EXIT_OK


# --- simulation ----------------------------------------------------------------------

def build_initial(cfg: RunConfig, grid: Grid):
    name, a = parse_profile(cfg.initial)
    try:
        if name == "gaussian":
            amp = complex(a[0].replace("i", "j")) if a else 1.0
            width = float(a[1]) if len(a) > 1 else 1.0
            center = float(a[2]) if len(a) > 2 else 0.0
            return profiles.gaussian(grid, amp, width, center)
        if name == "two_bump":
            amp = complex(a[0].replace("i", "j")) if a else 1.0
            width = float(a[1]) if len(a) > 1 else 1.0
            sep = float(a[2]) if len(a) > 2 else 4.0
            return profiles.two_bump(grid, amp, width, sep)
        if name == "file":
            path = Path(a[0])
            if not path.is_absolute():
                path = cfg.base_dir / path
            return profiles.load_field(grid, path)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"initial profile {cfg.initial!r}: {exc}") from None
    raise ConfigError(f"unknown initial profile {name!r}")


def run_simulation(cfg: RunConfig, out_dir, save_field: bool = False) -> dict:
    """Run one configuration into ``out_dir``; returns the manifest."""
    params = cfg.params
    if params.lambda_im >= 0:
        raise ConfigError("lambda_im must be < 0: the simulator only runs under the dissipative "
                          "condition Im(lambda) < 0 (Im(lambda) > 0 blows up in finite time)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid.cube(cfg.d, cfg.L, cfg.N)
    u0 = build_initial(cfg, grid)
    scfg = SolverConfig(dt=cfg.dt, t_end=cfg.t_end, record_stride=cfg.record_stride, dealias=cfg.dealias)
    (out / "config.echo").write_text(cfg.normalized())
    manifest = {
        "code_version": __version__,
        "backend": _kernels.backend(),
        "config": cfg.as_dict(),
        "params": {"d": params.d, "p": str(params.p), "lambda_re": params.lambda_re,
                   "lambda_im": params.lambda_im},
        "regime": classify_regime(params).as_dict(),
        "dealias": scfg.dealias_for(params),
        "start": datetime.now(timezone.utc).isoformat(),
    }
    t0 = time.perf_counter()
    try:
        with DiagnosticsCSV(out / "diagnostics.csv") as sink:
            summary = evolve(u0, params, scfg, sink)
    except NonFiniteError as exc:
        manifest.update(status="failed", error=str(exc), step=exc.step,
                        end=datetime.now(timezone.utc).isoformat())
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        raise
    manifest.update(
        status="complete",
        end=datetime.now(timezone.utc).isoformat(),
        wall_seconds=time.perf_counter() - t0,
        n_steps=summary.n_steps,
        n_records=summary.n_records,
        contaminated=summary.contaminated,
        contaminated_since=summary.contaminated_since,
        final=summary.final.__dict__,
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if save_field:
        profiles.save_field(summary.final_field, out / "field_final.csv")
    return manifest


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path("runs") / Path(args.config).stem
    try:
        manifest = run_simulation(cfg, out, save_field=args.save_field)
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    status = "contaminated" if manifest["contaminated"] else "clean"
    print(f"{out}: {manifest['n_steps']} steps, {manifest['n_records']} records, box {status}")
    return EXIT_OK


def _sweep_one(job):
    cfg_path, out = job
    try:
        run_simulation(load_config(cfg_path), out)
        return cfg_path, "ok"
    except Exception as exc:  # reported per job
        return cfg_path, f"error: {exc}"


def cmd_sweep(args) -> int:
    parent = Path(args.out)
    jobs = [(c, parent / Path(c).stem) for c in args.configs]
    if len({j[1] for j in jobs}) != len(jobs):
        print("error: config stems must be distinct", file=sys.stderr)
        return EXIT_USAGE
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_sweep_one, jobs))
    for cfg_path, status in results:
        print(f"{cfg_path}: {status}")
    return EXIT_OK if all(s == "ok" for _, s in results) else EXIT_FAIL


# --- analysis of run directories ---------------------------------------------------

def load_run(run_dir):
    run = Path(run_dir)
    diag = run / "diagnostics.csv"
    man = run / "manifest.json"
    if not diag.is_file():
        raise UsageError(f"{run}: missing diagnostics.csv")
    if not man.is_file():
        raise UsageError(f"{run}: missing manifest.json")
    manifest = json.loads(man.read_text())
    pr = manifest["params"]
    params = ModelParams(pr["d"], as_fraction(pr["p"]), pr["lambda_re"], pr["lambda_im"])
    series = read_diagnostics_csv(diag)
    if not series:
        raise UsageError(f"{run}: diagnostics.csv has no records")
    return manifest, params, series


def _audit(series, residual: float, mass_tol: float) -> dict:
    """Contamination / resolution audit run before a decay-bound failure is recorded."""
    contaminated = any(r.contaminated for r in series)
    return {"clean": not contaminated and residual < mass_tol,
            "contaminated": contaminated, "mass_residual": residual}


def _bound_status(passed: bool, audit: dict) -> str:
    if audit["contaminated"]:
        return "UNRELIABLE"
    if not passed:
        return "FAIL" if audit["clean"] else "UNRELIABLE"
    return "PASS"


def analyze_run(manifest, params, series, theorem="Main", window=None) -> dict:
    """All verdicts for one run: mass identity, monotone bounds, decay bounds, fit and iteration."""
    dt = manifest.get("config", {}).get("dt")
    residual = float(np.max(np.abs(analysis.mass_residual(series))))
    mass_tol = analysis.mass_identity_tolerance(dt)
    audit = _audit(series, residual, mass_tol)
    verdicts = [analysis.Verdict("mass_identity", "ide:1",
                                 "UNRELIABLE" if audit["contaminated"] else
                                 ("PASS" if residual < mass_tol else "FAIL"),
                                 residual, mass_tol, {"dt": dt})]
    verdicts.extend(analysis.check_monotone_bounds(series, params, dt=dt))

    th = theory.Theorem.parse(theorem)
    selected = [th] + ([theory.Theorem.PROP31] if th is theory.Theorem.MAIN else [])
    rates, margins, fit_info = [], {}, None
    for sel in selected:
        tag = "prop:31" if sel is theory.Theorem.PROP31 else "thm:1"
        name = f"decay_bound_{sel.value}"
        try:
            rate = theory.decay_exponent(params.d, params.p, sel)
            bc = analysis.check_upper_bound(series, rate, window)
        except (DomainError, ValueError) as exc:  # out of range or too few records
            verdicts.append(analysis.Verdict(name, tag, "N/A", float("nan"), 0.0, {"reason": str(exc)}))
            continue
        rates.append(rate)
        margins[sel] = bc.margin
        verdicts.append(analysis.Verdict(name, tag, _bound_status(bc.passed, audit), bc.margin,
                                         analysis.BOUND_TOLERANCE,
                                         {"rate": bc.rate, "window": list(bc.window), "c_ref": bc.c_ref,
                                          "audit": audit}))
        if sel is th:
            try:
                fit = analysis.fit_rate(series, window, rate.kind)
            except ValueError as exc:
                verdicts.append(analysis.Verdict(f"fitted_exponent_{th.value}", tag, "N/A",
                                                 float("nan"), 0.0, {"reason": str(exc)}))
                continue
            fit_info = fit.as_dict()
            target = float(rate.exponent) - analysis.FIT_SLACK
            verdicts.append(analysis.Verdict(f"fitted_exponent_{th.value}", tag,
                                             _bound_status(fit.exponent >= target, audit),
                                             fit.exponent - target, 0.0,
                                             {"fit": fit_info, "theory": str(rate.exponent),
                                              "slack": analysis.FIT_SLACK}))

    if len(margins) == 2:
        # anchored bound curves nest: the weaker Prop31 curve sits above Main's
        a, b = margins[theory.Theorem.PROP31], margins[theory.Theorem.MAIN]
        verdicts.append(analysis.Verdict("bound_nesting", "prop:31", "PASS" if a <= b + 1e-12 else "FAIL",
                                         b - a, 0.0, {"prop31_margin": a, "main_margin": b}))

    trace = None
    try:
        rep = analysis.iteration_trace(params.d, params.p, series, window)
    except DomainError:
        pass
    else:
        trace = {"n0": rep.n0, "stages": rep.stages[:50], "final_exponent": rep.final_exponent,
                 "stages_increasing": rep.stages_increasing, "gradient_bound": rep.gradient_bound,
                 "gradient_slope": rep.gradient_slope}
        verdicts.append(analysis.Verdict("iteration_final_stage", "thm:1",
                                         _bound_status(rep.passed and rep.stages_increasing, audit),
                                         rep.gradient_slope, analysis.GRADIENT_SLOPE_TOLERANCE, trace))
    return {"verdicts": verdicts, "fit": fit_info, "rates": rates, "trace": trace}


def cmd_check(args) -> int:
    manifest, params, series = load_run(args.run)
    window = tuple(args.window) if args.window else None
    result = analyze_run(manifest, params, series, args.theorem, window)
    verdicts = result["verdicts"]
    doc = {
        "run": str(args.run),
        "params": manifest["params"],
        "theorem": args.theorem,
        "window": list(window) if window else list(analysis.default_window(series)),
        "checks": [v.as_dict() for v in verdicts],
        "fit": result["fit"],
    }
    text = json.dumps(doc, indent=2, default=str) + "\n"
    run = Path(args.run)
    svg_tmp = run / ".decay.svg.tmp"
    analysis.plot_decay_svg(series, result["rates"], svg_tmp, window)
    (run / "verdicts.json").write_text(text)
    svg_tmp.replace(run / "decay.svg")
    if args.command == "fit" and result["fit"]:
        f = result["fit"]
        print(f"fitted {f['kind']} exponent {f['exponent']:.6f} on [{f['window'][0]:g}, {f['window'][1]:g}] "
              f"(rms residual {f['residual']:.2e})")
    for v in verdicts:
        print(f"{v.status:<10} {v.tag:<11} {v.name:<26} margin={v.margin:.4g} tol={v.tolerance:.3g}")
    return exit_status(v.status for v in verdicts)


# --- inequality suite -------------------------------------------------------------------

def run_verify(trials: int = 200, interp_trials: int = 500, seed: int = 0) -> dict:
    checks = []
    for d, q, m, N, L in ((1, 1, 1, 1024, 60.0), (1, 1, 2, 1024, 60.0), (2, Fraction(3, 2), 1, 128, 40.0)):
        for fam in ("gaussian", "hermite", "windowed"):
            rep = inequalities.verify_dual_gn(fam, q, m, trials, d=d, L=L, N=N, seed=seed)
            checks.append({"check": f"dual_gn d={d} q={q} m={m} family={fam}", "tag": "lem:in1",
                           "trials": rep.trials, "used": rep.used, "skipped": rep.skipped,
                           "worst": rep.worst, "worst_refined": rep.worst_refined,
                           "refinement_change": rep.refinement_change,
                           "tolerance": inequalities.REFINEMENT_TOLERANCE,
                           "status": "PASS" if rep.passed else "FAIL"})
    rep = inequalities.verify_dual_gn("centered_gaussian", 1, 1, trials, d=1, L=60.0, N=4096, seed=seed)
    dev = max(abs(r - inequalities.CENTERED_GAUSSIAN_RATIO) for r in rep.extra["ratios"])
    checks.append({"check": "dual_gn d=1 q=1 m=1 centered gaussian closed form", "tag": "lem:in1",
                   "trials": rep.trials, "used": rep.used, "worst": rep.worst,
                   "closed_form": inequalities.CENTERED_GAUSSIAN_RATIO, "max_deviation": dev,
                   "tolerance": 1e-5, "status": "PASS" if rep.passed and dev < 1e-5 else "FAIL"})
    params = ModelParams.from_complex(1, 2, -1 - 1j)
    rep = inequalities.interpolation_sweep(params, interp_trials, seed=seed)
    checks.append({"check": "holder interpolation d=1 p=2", "tag": "interpolation", "trials": rep.trials,
                   "worst": rep.worst, "tolerance": inequalities.INTERPOLATION_TOLERANCE,
                   "status": "PASS" if rep.passed else "FAIL"})
    rep = inequalities.gn_energy_sweep(params, min(trials, 100), seed=seed)
    checks.append({"check": "gagliardo-nirenberg energy step d=1 p=2", "tag": "gn-energy",
                   "trials": rep.trials, "worst": rep.worst, "worst_refined": rep.worst_refined,
                   "refinement_change": rep.refinement_change,
                   "tolerance": inequalities.REFINEMENT_TOLERANCE,
                   "status": "PASS" if rep.passed else "FAIL"})
    grid = Grid.cube(1, 80.0, 2048)
    r1, r2 = galilean_selftest(profiles.gaussian(grid), 1.0)
    checks.append({"check": "galilean operator identities", "tag": "eq:3",
                   "residual_group": r1, "residual_phase": r2, "tolerance": 1e-6,
                   "status": "PASS" if max(r1, r2) < 1e-6 else "FAIL"})
    return {"checks": checks}


def cmd_verify(args) -> int:
    doc = run_verify(args.trials, args.interp_trials, args.seed)
    for c in doc["checks"]:
        worst = c.get("worst", max(c.get("residual_group", 0), c.get("residual_phase", 0)))
        print(f"{c['status']:<6} {c['tag']:<14} {c['check']:<48} worst={worst:.6g}")
    _dump(doc, args.json)
    return exit_status(c["status"] for c in doc["checks"])


# --- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dissnls", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def theory_args(sp):
        sp.add_argument("-d", type=int, required=True, help="spatial dimension")
        sp.add_argument("-p", required=True, help="power, as a/b or a terminating decimal")
        sp.add_argument("--json", help="also write a JSON report here")

    sp = sub.add_parser("regime", help="classify (d, p, lambda)")
    theory_args(sp)
    sp.add_argument("--lambda", dest="lam", required=True, help="complex coefficient, e.g. -1-1i")
    sp.set_defaults(func=cmd_regime)

    sp = sub.add_parser("rates", help="decay laws of every theorem")
    theory_args(sp)
    sp.add_argument("--theorem", help="restrict to one of HLN, GKS_prev, Prop31, Main")
    sp.set_defaults(func=cmd_rates)

    sp = sub.add_parser("recurrence", help="bootstrap recurrence and stage table")
    theory_args(sp)
    sp.set_defaults(func=cmd_recurrence)

    sp = sub.add_parser("simulate", help="run a configuration into a run directory")
    sp.add_argument("config")
    sp.add_argument("-o", "--out", help="run directory (default runs/<config stem>)")
    sp.add_argument("--save-field", action="store_true", help="also write field_final.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run several configurations concurrently")
    sp.add_argument("configs", nargs="+")
    sp.add_argument("-o", "--out", default="runs")
    sp.add_argument("-j", "--jobs", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    for name, help_ in (("fit", "fit the decay exponent and write verdicts"),
                        ("check", "run every check on a run directory")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("run")
        sp.add_argument("--theorem", default="Main")
        sp.add_argument("--window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
        sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("verify", help="inequality suite")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--interp-trials", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_verify)
    return ap


def _merge_lambda(argv):
    # "--lambda -1-1i" would otherwise be read as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--lambda" and i + 1 < len(argv):
            out.append("--lambda=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = _merge_lambda(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
