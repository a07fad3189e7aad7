"""Command-line front end.

Subcommands: analyze | synthesize | robust | sweep | verify.  Each
consumes a system JSON config, writes a JSON report (stable key order)
and optionally CSV files, and exits with 0 when the run completed
(feasible or provably infeasible), 2 on input errors, 3 on numerical
failures.
"""

import argparse
import hashlib
import json
import sys as _sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, builders, kernel as kb, verify
from . import sdp as sdpmod
from .exceptions import DdsynError, InputError, NumericalFailureError
from .lmi import count_decision_variables
from .model import TuningParams, close_loop, system_from_dict
from .sdp import SolverOptions

#: additive pad above the optimal gamma used when re-solving for a
#: well-centered controller; keeps the certified gain within 1e-3 of
#: the reported optimum
GAMMA_RECENTER_PAD = 5e-4

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        cfg = json.loads(raw.decode("utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def _tuning_from(cfg_tuning, args):
    eta1 = args.eta1 if args.eta1 is not None else \
        (cfg_tuning.eta1 if cfg_tuning else 1.0)
    eta2 = args.eta2 if args.eta2 is not None else \
        (cfg_tuning.eta2 if cfg_tuning else 0.0)
    if args.eps is not None:
        eps = tuple(float(x) for x in args.eps.split(",")) if args.eps else ()
    else:
        eps = cfg_tuning.eps if cfg_tuning else ()
    return TuningParams(eta1=float(eta1), eta2=float(eta2), eps=eps)


def _auto_scale(sys):
    s = kb.auto_scale_vector(sys.basis, sys.r)
    basis, smap = kb.scale(sys.basis, s)
    return replace(sys, basis=basis, A3=smap.apply(sys.A3),
                   C3=smap.apply(sys.C3))


def _solver_options(args, out_path):
    trace = f"{out_path}.trace.jsonl" if getattr(args, "trace", False) else None
    return SolverOptions(trace_path=trace)


def _report(args, command, sha, options, body, t0):
    rep = {
        "command": command,
        "input": args.config,
        "input_sha256": sha,
        "version": __version__,
        "solver": options.as_dict(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    rep.update(body)
    text = json.dumps(rep, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return rep


def _spectral_summary(sys_or_cl, N):
    rep = verify.spectral_abscissa(sys_or_cl, N=N)
    top = rep.roots[:6]
    return rep.abscissa, [[float(z.real), float(z.imag)] for z in top]


def cmd_analyze(args):
    t0 = time.perf_counter()
    cfg, sha = _load_config(args.config)
    sysm, supply, unc, cfg_tuning = system_from_dict(cfg)
    if args.auto_scale:
        sysm = _auto_scale(sysm)
    tuning = _tuning_from(cfg_tuning, args)
    condition = args.condition or ("analysis" if supply is not None else "simple")
    options = _solver_options(args, args.out)

    if condition == "analysis" and unc is not None:
        prob = builders.robust_analysis_constraints(sysm, supply, unc)
    elif condition == "analysis":
        prob = builders.analysis_constraints(sysm, supply)
    elif condition == "simple":
        prob = builders.simple_stability_constraints(sysm)
    elif condition == "slack":
        prob = builders.slack_stability_constraints(sysm, tuning)
    else:
        raise InputError(f"unknown condition {condition!r}")

    if prob.objective is not None:
        cert = sdpmod.minimize_linear(prob, options)
    else:
        cert = sdpmod.solve_feasibility(prob, options)
    if cert.status == "numerical-failure":
        raise NumericalFailureError(cert.message or cert.solver_status)
    body = {
        "condition": condition,
        "feasible": cert.feasible,
        "margin": cert.margin,
        "ndv": count_decision_variables(prob),
        "iterations": cert.iterations,
    }
    if cert.feasible and cert.objective_value is not None:
        body["gamma"] = cert.objective_value
    _report(args, "analyze", sha, options, body, t0)
    return EXIT_OK


def _synthesize_common(args, robust):
    t0 = time.perf_counter()
    cfg, sha = _load_config(args.config)
    sysm, supply, unc, cfg_tuning = system_from_dict(cfg)
    if supply is None:
        raise InputError("synthesis requires a supply section")
    if robust and unc is None:
        raise InputError("robust synthesis requires an uncertainty section")
    if args.auto_scale:
        sysm = _auto_scale(sysm)
    tuning = _tuning_from(cfg_tuning, args)
    options = _solver_options(args, args.out)

    def build(sup):
        if robust:
            return builders.thm2_constraints(sysm, sup, unc, tuning)
        return builders.thm1_constraints(sysm, sup, tuning)

    gamma_opt = None
    prob = build(supply)
    ndv = count_decision_variables(prob)
    if supply.is_gamma_variable:
        cert = sdpmod.minimize_linear(prob, options)
        if cert.status == "numerical-failure":
            raise NumericalFailureError(cert.message or cert.solver_status)
        if not cert.feasible:
            _report(args, "robust" if robust else "synthesize", sha, options,
                    {"feasible": False, "ndv": ndv}, t0)
            return EXIT_OK
        gamma_opt = cert.objective_value
        # re-solve at a slightly padded level for a well-centered gain
        from .model import l2_supply
        fixed = l2_supply(gamma_opt + GAMMA_RECENTER_PAD, sysm.m, sysm.q)
        prob = build(fixed)
        cert = sdpmod.solve_feasibility(prob, options)
    else:
        cert = sdpmod.solve_feasibility(prob, options)
    if cert.status == "numerical-failure":
        raise NumericalFailureError(cert.message or cert.solver_status)
    if not cert.feasible:
        _report(args, "robust" if robust else "synthesize", sha, options,
                {"feasible": False, "ndv": ndv}, t0)
        return EXIT_OK

    res = sdpmod.extract_synthesis(cert, prob)
    cl = close_loop(sysm, res.K)
    abscissa, top_roots = _spectral_summary(cl, args.spectral_n)
    body = {
        "feasible": True,
        "K": res.K.tolist(),
        "ndv": ndv,
        "margin": cert.margin,
        "abscissa": abscissa,
        "rightmost_roots": top_roots,
        "x_cond": res.x_cond,
    }
    if gamma_opt is not None:
        body["gamma"] = gamma_opt
    elif supply.gamma is not None:
        body["gamma"] = supply.gamma
    if robust:
        body["kappa1"] = res.kappa1
        body["kappa2"] = res.kappa2
    if args.sim_T > 0 and abscissa < 0:
        traj = verify.simulate(cl, phi=lambda tau: np.ones(sysm.n),
                               T=args.sim_T, h=args.sim_h)
        x0n = float(np.linalg.norm(traj.x[0]))
        body["contraction"] = float(np.linalg.norm(traj.x[-1])) / x0n
        if sysm.q and supply.kind == "l2gain":
            body["empirical_gain"] = verify.empirical_l2_gain(
                cl, T=args.sim_T, h=args.sim_h)
    _report(args, "robust" if robust else "synthesize", sha, options, body, t0)
    return EXIT_OK


def cmd_synthesize(args):
    return _synthesize_common(args, robust=False)


def cmd_robust(args):
    return _synthesize_common(args, robust=True)


def cmd_sweep(args):
    t0 = time.perf_counter()
    cfg, sha = _load_config(args.config)
    sysm, supply, unc, cfg_tuning = system_from_dict(cfg)
    if args.auto_scale:
        sysm = _auto_scale(sysm)
    tuning = _tuning_from(cfg_tuning, args)
    options = _solver_options(args, args.out)
    sweep_cfg = cfg.get("sweep", {})
    r_min = args.r_min if args.r_min is not None else sweep_cfg.get("r_min")
    r_max = args.r_max if args.r_max is not None else sweep_cfg.get("r_max")
    step = args.step if args.step is not None else sweep_cfg.get("step")
    if r_min is None or r_max is None or step is None:
        raise InputError("sweep needs --r-min, --r-max and --step "
                         "(or a 'sweep' section in the config)")
    condition = args.condition or ("analysis" if supply is not None else "simple")
    res = verify.sweep_stability(sysm, float(r_min), float(r_max), float(step),
                                 condition=condition, supply=supply,
                                 tuning=tuning, refine_tol=args.refine,
                                 options=options)
    if args.csv:
        verify.write_sweep_csv(args.csv, res)
    body = {
        "condition": condition,
        "r_min": float(r_min), "r_max": float(r_max), "step": float(step),
        "intervals": [[a, b] for a, b in res.intervals],
        "ndv": res.ndv,
        "n_points": len(res.records),
        "n_solver_failures": len(res.failures),
    }
    _report(args, "sweep", sha, options, body, t0)
    return EXIT_OK


def cmd_verify(args):
    t0 = time.perf_counter()
    cfg, sha = _load_config(args.config)
    sysm, supply, unc, _ = system_from_dict(cfg)
    if args.auto_scale:
        sysm = _auto_scale(sysm)
    options = _solver_options(args, args.out)
    K = cfg.get("K")
    if K is not None:
        target = close_loop(sysm, np.asarray(K, dtype=float))
        mode = "closed-loop"
    else:
        target = sysm
        mode = "open-loop"
    abscissa, top_roots = _spectral_summary(target, args.spectral_n)
    body = {
        "mode": mode,
        "spectral_n": args.spectral_n,
        "abscissa": abscissa,
        "rightmost_roots": top_roots,
        "stable": abscissa < 0,
    }
    if args.sim_T > 0 and abscissa < 0 and mode == "closed-loop":
        traj = verify.simulate(target, phi=lambda tau: np.ones(sysm.n),
                               T=args.sim_T, h=args.sim_h)
        x0n = float(np.linalg.norm(traj.x[0]))
        body["contraction"] = float(np.linalg.norm(traj.x[-1])) / x0n
        if args.csv:
            verify.write_trajectory_csv(args.csv, traj)
    _report(args, "verify", sha, options, body, t0)
    return EXIT_OK


def _add_common(sp):
    sp.add_argument("--config", required=True, help="system JSON path")
    sp.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    sp.add_argument("--eta1", type=float, default=None)
    sp.add_argument("--eta2", type=float, default=None)
    sp.add_argument("--eps", type=str, default=None,
                    help="comma-separated slack factors, one per kernel component")
    sp.add_argument("--auto-scale", action="store_true",
                    help="rescale the kernel to equalize the Gram diagonal")
    sp.add_argument("--trace", action="store_true",
                    help="write solver iteration trace next to the report")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ddsyn",
        description="LMI analysis and synthesis for linear distributed-delay systems")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analyze", help="open-loop feasibility/dissipativity test")
    _add_common(sp)
    sp.add_argument("--condition", choices=("analysis", "simple", "slack"),
                    default=None)
    sp.set_defaults(fn=cmd_analyze)

    for name, fn in (("synthesize", cmd_synthesize), ("robust", cmd_robust)):
        sp = sub.add_parser(name, help=f"{name} a state-feedback gain")
        _add_common(sp)
        sp.add_argument("--spectral-n", type=int, default=20)
        sp.add_argument("--sim-T", type=float, default=0.0,
                        help="free-response horizon (0 skips simulation)")
        sp.add_argument("--sim-h", type=float, default=2e-3)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("sweep", help="delay-grid feasibility sweep")
    _add_common(sp)
    sp.add_argument("--r-min", type=float, default=None)
    sp.add_argument("--r-max", type=float, default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--refine", type=float, default=1e-4,
                    help="bisection tolerance for interval boundaries")
    sp.add_argument("--condition", choices=("analysis", "simple", "slack"),
                    default=None)
    sp.add_argument("--csv", default=None, help="per-point CSV path")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("verify", help="characteristic roots / simulation check")
    _add_common(sp)
    sp.add_argument("--spectral-n", type=int, default=20)
    sp.add_argument("--sim-T", type=float, default=0.0)
    sp.add_argument("--sim-h", type=float, default=2e-3)
    sp.add_argument("--csv", default=None, help="trajectory CSV path")
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except DdsynError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    _sys.exit(main())
