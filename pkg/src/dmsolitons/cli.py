"""Command-line front end: solve | verify | decay | evolve | compare | sweep.

Exit codes: 0 success, 1 configuration error, 2 the run finished but a
check failed (non-convergence, failed assertion, unusable decay range).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import output
from .analysis import (SUITES, InsufficientRangeError, UnknownSuiteError, decay_fit, merge_all, run_suite,
                       run_suites, tail_alpha, verify_self_consistency)
from .analysis.suites import ALL, DELTA
from .analysis.tails import DECAY_FLOOR, envelope_log
from .dynamics import EvolutionConfig, compare_averaging, converged_step, evolve_averaged, evolve_full
from .functional import QuadratureRule
from .lattice import GridFunction, read_csv, write_csv
from .propagator import DiffractionProfile, ProfileError
from .solver import METHODS, ConvergenceError, SolverConfig, maximize

OK, CONFIG_ERROR, CHECK_FAILED = 0, 1, 2

FULL_NORM_TOL = 1e-10      # per unit fast time
AVG_NORM_TOL = 1e-8        # per unit slow time
AVG_ENERGY_TOL = 1e-6      # per unit slow time
ORBIT_TOL = 1e-6           # per unit slow time, soliton data on the averaged flow
RECURRENCE_TOL = 1e-10
CLOSENESS_BOUND = 10.0


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; here that is a configuration error."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(CONFIG_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _load_profile(path: str | None, default: DiffractionProfile | None = None) -> DiffractionProfile:
    if path is None:
        if default is None:
            raise ConfigError("a --profile file is required")
        return default
    try:
        return DiffractionProfile.load(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"profile file not found: {path}") from exc
    except (ProfileError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid profile {path}: {exc}") from exc


def _config(args: argparse.Namespace, profile: DiffractionProfile | None = None) -> dict:
    """Run configuration for the digest: flags minus output location, profile by content."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func", "workers")}
    if profile is not None:
        cfg["profile"] = [list(s) for s in profile.segments]
    for k in ("init", "soliton", "field"):
        if cfg.get(k):
            cfg[k] = Path(cfg[k]).name
    return cfg


# solve

def _solve_into(out: Path, profile: DiffractionProfile, lam: float, radius: int, dim: int, tol: float,
                method: str, max_iter: int, quad_order: int, config: dict) -> tuple[int, dict]:
    if radius < 1 or dim < 1 or quad_order < 1:
        raise ConfigError("radius, dim and quad-order must be positive")
    try:
        cfg = SolverConfig(lam=lam, method=method, tol=tol, max_iter=max_iter)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rule = QuadratureRule.for_profile(profile, quad_order)
    try:
        res = maximize(cfg, profile, rule=rule, radius=radius, dim=dim)
        code = OK
    except ConvergenceError as exc:
        res = exc.result
        code = CHECK_FAILED
        print(f"solve: not converged: {exc}", file=sys.stderr)
    write_csv(res.f, out / "field.csv")
    output.write_rows(out / "objective-trace.csv", ["iteration", "phi"], enumerate(res.objective_trace))
    doc = res.to_dict()
    doc.update({"field": "field.csv", "dim": dim, "radius": radius,
                "profile": profile.to_json(), "omega_minus_p_over_lambda": abs(res.omega - res.p_lambda / lam)})
    output.write_json(out / "soliton.json", doc, config, profile.tau)
    return code, doc


def cmd_solve(args) -> int:
    profile = _load_profile(args.profile)
    out = output.output_dir(args.out)
    code, doc = _solve_into(out, profile, args.lam, args.radius, args.dim, args.tol, args.method,
                            args.max_iter, args.quad_order, _config(args, profile))
    print(f"solve: P_lambda={doc['p_lambda']:.15g} omega={doc['omega']:.15g} "
          f"residual={doc['residual']:.3e} iterations={doc['iterations']}")
    return code


# verify

def cmd_verify(args) -> int:
    profile = _load_profile(args.profile, DiffractionProfile.two_step())
    if args.suite != ALL and args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + (ALL,))}")
    out = output.output_dir(args.out)
    config = _config(args, profile)
    if args.suite == ALL:
        parts = run_suites(args.seed, args.dims, profile, workers=args.workers)
        reports = parts + [merge_all(parts, args.seed)]
    else:
        reports = [run_suite(args.suite, args.seed, args.dims, profile)]
    print(f"verify: seed={args.seed}")
    for rep in reports:
        doc = rep.to_dict()
        doc["seed"] = args.seed
        doc["dims"] = list(args.dims)
        output.write_json(out / f"report_{rep.suite}.json", doc, config, profile.tau)
        print(rep.summary())
    return OK if reports[-1].verdict else CHECK_FAILED


# decay

def _load_field(path: str, radius: int | None = None) -> tuple[GridFunction, dict]:
    """A soliton JSON (field path resolved next to it) or a field CSV."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file not found: {path}")
    if p.suffix == ".json":
        try:
            doc = json.loads(p.read_text())
            return read_csv(p.parent / doc["field"]), doc
        except (KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path} is not a soliton file: {exc}") from exc
    try:
        return read_csv(p, radius), {}
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable field {path}: {exc}") from exc


def _profile_from(doc: dict, path: str | None) -> DiffractionProfile:
    if path is not None:
        return _load_profile(path)
    if "profile" in doc:
        return DiffractionProfile.from_json(doc["profile"])
    return DiffractionProfile.two_step()


def cmd_decay(args) -> int:
    if bool(args.soliton) == bool(args.field):
        raise ConfigError("give exactly one of --soliton or --field")
    f, doc = _load_field(args.soliton or args.field)
    if f.dim != 1:
        raise ConfigError("decay analysis is one-dimensional")
    profile = _profile_from(doc, args.profile)
    tau = args.tau if args.tau is not None else profile.tau
    alpha = tail_alpha(f)
    # a zero profile has a single-site maximiser; below the floor it counts as compact
    single_site = alpha.alpha.size < 2 or alpha.alpha[1] <= args.floor
    if not tau > 0 and not (alpha.compact or single_site):
        raise ConfigError("decay needs tau > 0 (the envelope is undefined for a zero profile)")
    out = output.output_dir(args.out)
    config = _config(args, profile)
    config["tau"] = tau
    n = alpha.n
    env = np.exp(envelope_log(n, tau)) if tau > 0 else np.full(n.size, np.nan)
    result = {"n_max": int(n[-1]), "alpha0": float(alpha.alpha[0]), "floor": args.floor}
    code, model = OK, np.full(n.size, np.nan)
    try:
        if not tau > 0:
            raise InsufficientRangeError("zero profile")
        fit = decay_fit(alpha, tau, args.floor)
    except InsufficientRangeError as exc:
        fit = None
        if alpha.compact or single_site:
            result["status"] = "compact support"
        else:
            result["status"] = "insufficient range"
            result["reason"] = str(exc)
            code = CHECK_FAILED
    if fit is not None:
        model = np.exp(fit.intercept - fit.mu_fit * (n + 1.0) * np.log(n + 1.0))
        result["fit"] = fit.to_dict()
        result["minimal_C"] = fit.c_min
        if not fit.super_exponential:
            result["status"] = "not super-exponential"
            code = CHECK_FAILED
        else:
            result["status"] = "super-exponential"
        sc = verify_self_consistency(alpha, args.delta, tau=tau, floor=args.floor)
        result["self_consistency"] = sc.constants
        result["self_consistency_verdict"] = "pass" if sc.verdict else "fail"
        if not sc.verdict:
            code = CHECK_FAILED
    scaled = env * (fit.c_min if fit is not None else 1.0)
    output.write_rows(out / "decay.csv", ["n", "alpha", "envelope", "model"],
                      zip(n.tolist(), alpha.alpha.tolist(), env.tolist(), model.tolist()))
    output.svg_log_plot(out / "decay.svg",
                        [("alpha(n)", n, alpha.alpha, "#1f4e9c"),
                         ("C x envelope", n, scaled, "#c0392b"),
                         ("fit", n, model, "#2e8b57")],
                        title=f"tail distribution, tau={tau:g}")
    output.write_json(out / "fit.json", result, config, tau)
    print(f"decay: {result['status']}"
          + (f" mu_fit={fit.mu_fit:.6g} C={fit.c_min:.6g}" if fit is not None else ""))
    return code


# evolve / compare

def _initial(args) -> tuple[GridFunction, dict]:
    if args.init == "delta":
        return GridFunction.delta(args.dim, args.radius), {}
    if args.init is None:
        raise ConfigError("--init is required (soliton JSON, field CSV or 'delta')")
    return _load_field(args.init)


def _check(checks: list, label: str, measured: float, bound: float) -> None:
    checks.append({"label": label, "measured": measured, "bound": bound, "pass": bool(measured <= bound)})


def cmd_evolve(args) -> int:
    if args.mode == "compare":
        return cmd_compare(args)
    if args.eps < 0:
        raise ConfigError("eps must be non-negative")
    f, doc = _initial(args)
    profile = _profile_from(doc, args.profile)
    t_end = args.t_end if args.t_end is not None else (1.0 / args.eps if args.eps > 0 else 1.0)
    try:
        cfg = EvolutionConfig(eps=args.eps, d_av=args.d_av, t_end=t_end, h=min(args.h, profile.min_segment),
                              record_dt=args.record_dt, max_slow_time=max(10.0, args.eps * t_end))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = output.output_dir(args.out)
    config = _config(args, profile)
    checks: list[dict] = []
    result = {"mode": args.mode, "eps": args.eps, "t_end": t_end}
    if args.check_order:
        h, ratio, diffs = converged_step(f, EvolutionConfig(eps=args.eps, d_av=args.d_av, t_end=min(t_end, 1.0),
                                                            h=cfg.h), profile, args.mode)
        cfg = EvolutionConfig(eps=cfg.eps, d_av=cfg.d_av, t_end=t_end, h=h, record_dt=cfg.record_dt,
                              max_slow_time=cfg.max_slow_time)
        result["step_order"] = {"h": h, "ratio": ratio, "diffs": diffs}
        exact = max(diffs) < 1e-13
        checks.append({"label": "Strang order ratio in [3, 5]", "measured": ratio, "bound": [3, 5],
                       "pass": bool(exact or 3 <= ratio <= 5)})
    slow = max(1.0, args.eps * t_end)
    if args.mode == "full":
        traj = evolve_full(f, cfg, profile)
        _check(checks, "norm drift", traj.norm_drift(), FULL_NORM_TOL * max(1.0, t_end))
        if args.eps == 0:
            ks = [k for k, t in enumerate(traj.times) if abs(t - round(t)) < 1e-9 and t > 0]
            rec = max((float(np.linalg.norm(traj.fields[k].values - f.values)) for k in ks), default=0.0)
            _check(checks, "period recurrence", rec, RECURRENCE_TOL)
        dev = [float(np.linalg.norm(u.values - f.values)) for u in traj.fields]
    else:
        traj = evolve_averaged(f, cfg, profile)
        _check(checks, "norm drift", traj.norm_drift(), AVG_NORM_TOL * slow)
        _check(checks, "energy drift", traj.energy_drift(), AVG_ENERGY_TOL * slow)
        dev = [float(np.linalg.norm(u.values - f.values)) for u in traj.fields]
        if args.eps == 0:
            _check(checks, "constant trajectory", max(dev), 0.0)
        elif "omega" in doc and args.d_av == 0:
            w = doc["omega"]
            dev = [float(np.linalg.norm(u.values - np.exp(1j * args.eps * w * t) * f.values))
                   for t, u in zip(traj.times, traj.fields)]
            _check(checks, "soliton orbit deviation", max(dev), ORBIT_TOL * slow)
    traj.write_csv(out / "trajectory.csv", dev)
    result.update({"norm_drift": traj.norm_drift(), "energy_drift": traj.energy_drift(),
                   "checks": checks, "verdict": "pass" if all(c["pass"] for c in checks) else "fail"})
    output.write_json(out / "evolve.json", result, config, profile.tau)
    for c in checks:
        print(f"evolve: {'PASS' if c['pass'] else 'FAIL'} {c['label']}: {c['measured']:.3e}")
    return OK if result["verdict"] == "pass" else CHECK_FAILED


def cmd_compare(args) -> int:
    epss = args.eps if isinstance(args.eps, list) else [args.eps]
    if not epss or any(e < 0 for e in epss):
        raise ConfigError("--eps needs non-negative values")
    f, doc = _initial(args)
    profile = _profile_from(doc, args.profile)
    out = output.output_dir(args.out)
    config = _config(args, profile)
    omega = doc.get("omega")
    runs, checks = [], []
    for eps in epss:
        rep, full, avg = compare_averaging(f, eps, profile, C=args.C, d_av=args.d_av, h=args.h,
                                           h_averaged=args.h_averaged, richardson=not args.no_richardson,
                                           omega=omega)
        tag = f"{eps:g}"
        full.write_csv(out / f"trajectory_full_eps{tag}.csv", rep.deviation)
        avg.write_csv(out / f"trajectory_averaged_eps{tag}.csv", rep.deviation)
        d = rep.to_dict()
        runs.append(d)
        slow = max(1.0, eps * rep.t_end)
        _check(checks, f"closeness ratio eps={tag}", rep.ratio, args.bound)
        _check(checks, f"full norm drift eps={tag}", rep.norm_drift_full, FULL_NORM_TOL * max(1.0, rep.t_end))
        _check(checks, f"averaged energy drift eps={tag}", rep.energy_drift_averaged, AVG_ENERGY_TOL * slow)
        if omega is not None and eps > 0:
            _check(checks, f"return to soliton orbit eps={tag}", rep.max_orbit_deviation, 10.0 * eps)
    by_eps = sorted((r for r in runs if r["eps"] > 0), key=lambda r: -r["eps"])
    for a, b in zip(by_eps, by_eps[1:]):
        checks.append({"label": f"ratio non-increasing {a['eps']:g} -> {b['eps']:g}",
                       "measured": b["ratio"], "bound": a["ratio"],
                       "pass": bool(b["ratio"] <= a["ratio"] * (1 + 1e-9))})
        if math.isclose(b["eps"], a["eps"] / 2) and a["ratio"] > 0:
            rr = b["ratio"] / a["ratio"]
            checks.append({"label": f"ratio of ratios {a['eps']:g} -> {b['eps']:g}", "measured": rr,
                           "bound": [0.3, 1.7], "pass": bool(0.3 <= rr <= 1.7)})
    verdict = all(c["pass"] for c in checks)
    output.write_json(out / "closeness.json", {"runs": runs, "checks": checks, "C": args.C,
                                               "bound": args.bound, "verdict": "pass" if verdict else "fail"},
                      config, profile.tau)
    for r in runs:
        print(f"compare: eps={r['eps']:g} max|u-v|={r['max_deviation']:.3e} ratio={r['ratio']:.3e}")
    for c in checks:
        if not c["pass"]:
            print(f"compare: FAIL {c['label']}", file=sys.stderr)
    return OK if verdict else CHECK_FAILED


# sweep

def _sweep_job(job: dict) -> dict:
    out = Path(job["out"])
    out.mkdir(parents=True, exist_ok=True)
    profile = DiffractionProfile.from_json(job["profile"], name=job["name"])
    code, doc = _solve_into(out, profile, job["lam"], job["radius"], 1, job["tol"], job["method"],
                            job["max_iter"], 16, job["config"])
    row = {"dir": out.name, "profile": job["name"], "lambda": job["lam"], "solve_exit": code,
           "p_lambda": doc["p_lambda"], "omega": doc["omega"], "residual": doc["residual"]}
    codes = [code]
    for eps in job["eps"]:
        ns = argparse.Namespace(eps=[eps], init=str(out / "soliton.json"), profile=None, dim=1,
                                radius=job["radius"], out=str(out / f"eps{eps:g}"), C=1.0, d_av=0.0,
                                h=1.0 / 64, h_averaged=1.0 / 8, no_richardson=False, bound=CLOSENESS_BOUND)
        c = cmd_compare(ns)
        codes.append(c)
        row[f"compare_exit_eps{eps:g}"] = c
    row["exit"] = max(codes)
    return row


def cmd_sweep(args) -> int:
    profiles = [_load_profile(p) for p in args.profiles]
    out = output.output_dir(args.out)
    config = _config(args)
    config["profiles"] = [[list(s) for s in p.segments] for p in profiles]
    jobs = []
    for path, p in zip(args.profiles, profiles):
        for lam in args.lambdas:
            name = Path(path).stem
            jobs.append({"out": str(out / f"{name}_lam{lam:g}"), "profile": p.to_json(), "name": name,
                         "lam": lam, "radius": args.radius, "tol": args.tol, "method": args.method,
                         "max_iter": args.max_iter, "eps": list(args.eps or []),
                         "config": dict(config, lam=lam, profile=[list(s) for s in p.segments])})
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    code = max((r["exit"] for r in rows), default=OK)
    output.write_json(out / "sweep.json", {"runs": rows}, config, None)
    for r in rows:
        print(f"sweep: {r['dir']} P_lambda={r['p_lambda']:.12g} exit={r['exit']}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dmsolitons", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="output directory (default: $DMSOLITON_OUTPUT_DIR or .)")

    p = sub.add_parser("solve", help="maximise phi on the sphere ||f||^2 = lambda")
    p.add_argument("--profile", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--radius", type=int, default=64)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--method", choices=METHODS, default="gradient_ascent")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--quad-order", type=int, default=16)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run inequality verification suites")
    p.add_argument("--suite", default=ALL, help=f"one of {', '.join(SUITES + (ALL,))}")
    p.add_argument("--dims", type=_ints, default=[1, 2])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile")
    p.add_argument("--workers", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decay", help="tail distribution, decay fit and self-consistency constants")
    p.add_argument("--soliton")
    p.add_argument("--field")
    p.add_argument("--profile")
    p.add_argument("--tau", type=float)
    p.add_argument("--floor", type=float, default=DECAY_FLOOR)
    p.add_argument("--delta", type=float, default=DELTA)
    common(p)
    p.set_defaults(func=cmd_decay)

    def dynamics_flags(p):
        p.add_argument("--profile")
        p.add_argument("--init", help="soliton JSON, field CSV or 'delta'")
        p.add_argument("--radius", type=int, default=64, help="box radius for --init delta")
        p.add_argument("--dim", type=int, default=1, help="dimension for --init delta")
        p.add_argument("--d-av", type=float, default=0.0)
        p.add_argument("--h", type=float, default=1.0 / 64)
        p.add_argument("--C", type=float, default=1.0)
        p.add_argument("--h-averaged", type=float, default=1.0 / 8)
        p.add_argument("--no-richardson", action="store_true")
        p.add_argument("--bound", type=float, default=CLOSENESS_BOUND)
        common(p)

    p = sub.add_parser("evolve", help="integrate the full or averaged equation")
    p.add_argument("--mode", choices=("full", "averaged", "compare"), default="full")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--t-end", type=float)
    p.add_argument("--record-dt", type=float, default=1.0)
    p.add_argument("--check-order", action="store_true", help="halve h until the Strang order test passes")
    dynamics_flags(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("compare", help="full versus averaged dynamics over [0, C/eps]")
    p.add_argument("--eps", type=_floats, default=[0.1, 0.05, 0.025])
    dynamics_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="solve (and compare) over profiles x lambdas x eps")
    p.add_argument("--profiles", nargs="+", required=True)
    p.add_argument("--lambdas", type=_floats, default=[1.0])
    p.add_argument("--eps", type=_floats, default=[])
    p.add_argument("--radius", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--method", choices=METHODS, default="gradient_ascent")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownSuiteError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except OSError as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
