"""Command-line interface: one binary, one subcommand per pipeline stage.

Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numeric
failure.  Errors print a one-line machine-parseable code to stderr.
Every run writes a JSON manifest sidecar next to its primary output.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from seppnet import __version__
from seppnet.model import (
    BasisSet,
    Bounds,
    InfluenceModel,
    InputFormatError,
    NumericError,
    ParameterError,
    Saturation,
    bounds_for,
    rate_bounds,
)
from seppnet import io as sio
from seppnet.hawkes import discretize
from seppnet.simulate import DesignSpec, clip_rate, make_design, simulate
from seppnet.solver import FitConfig, RegularizerSpec, fit
from seppnet.experiments import (
    baseline_constant,
    evaluate_loglik,
    phase_transition,
    spectral_cluster,
    sweep_mse,
)
from seppnet import theory as th


def _parse_basis(text):
    kind, _, arg = text.partition(":")
    if kind == "geometric":
        return BasisSet.geometric(float(arg or 0.0))
    if kind == "lags":
        return BasisSet.lags(int(arg or 1))
    raise InputFormatError("E_BASIS", f"unknown basis format {text!r}")


def _parse_grid(text):
    """'a:b:step' inclusive float grid, or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            lo, hi = parts
            step = 1.0
        else:
            lo, hi, step = parts
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 12) for i in range(n)]
    return [float(p) for p in text.split(",")]


def _resolve_seed(args):
    env = os.environ.get("SEPPNET_SEED")
    if env is not None:
        return int(env)
    return getattr(args, "seed", 0)


def _resolve_lambda(text, reg_kind, M, T, R_max=1.0):
    """'auto', a literal, or 'theory:C=<c>'; returns (value, description)."""
    if text == "auto":
        val = th.recommended_lambda(reg_kind, M, T, mode="practical")
        return val, "auto"
    if text.startswith("theory"):
        c = 1.0
        _, _, tail = text.partition(":")
        if tail.startswith("C="):
            c = float(tail[2:])
        val = th.recommended_lambda(reg_kind, M, T, R_max=R_max, C=c, mode="theory")
        return val, text
    return float(text), "literal"


def _manifest(args, out, t0, inputs=(), outputs=None):
    config = {k: v for k, v in vars(args).items() if k != "func"}
    sio.write_manifest(
        out,
        args.command,
        config,
        _resolve_seed(args),
        inputs,
        outputs or [out],
        time.time() - t0,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    t0 = time.time()
    model = sio.read_model_json(args.model)
    X = simulate(model, args.T, seed=_resolve_seed(args), burn_in=args.burn_in)
    sio.write_counts_csv(args.out, X)
    _manifest(args, args.out, t0, inputs=[args.model])
    return 0


def cmd_design(args):
    t0 = time.time()
    kw = {"kind": args.kind, "M": args.M, "seed": _resolve_seed(args)}
    if args.kind == "sparse":
        kw["s"] = args.s
    elif args.kind == "lowrank":
        kw.update(r=args.r, a_max=args.a_max, two_rows=args.two_rows)
    elif args.kind == "hub":
        kw["s_G"] = args.s_G
    elif args.kind == "block":
        kw["a_max"] = args.a_max
    A = make_design(DesignSpec(**kw))
    basis = _parse_basis(args.basis)
    sat = Saturation.clip(args.clip)
    nu = np.full(args.M, args.nu)
    if basis.K > 1:
        A = np.hstack([A] + [np.zeros_like(A)] * (basis.K - 1))
    model = InfluenceModel(nu, A, basis, sat, bounds_for(A, nu))
    sio.write_model_json(args.out, model, extra={"design": args.kind})
    _manifest(args, args.out, t0)
    return 0


def cmd_fit(args):
    t0 = time.time()
    X = sio.read_counts_csv(args.counts)
    basis = _parse_basis(args.basis)
    sat = Saturation.clip(args.clip)
    M, T = X.M, X.T
    reg_kind = args.reg
    lam, lam_src = _resolve_lambda(args.lam, reg_kind if reg_kind != "none" else "l1", M, T)
    lam2 = args.lam2 if args.lam2 is not None else lam
    reg = RegularizerSpec(reg_kind, lam if reg_kind != "none" else 0.0, lam2)
    bounds = Bounds(
        a_max=args.a_max, a_min=args.a_min, nu_min=args.nu_min, nu_max=args.nu_max
    )
    cfg = FitConfig(
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        fit_nu=args.fit_nu,
        project_feasible=args.project,
        seed=_resolve_seed(args),
    )
    result = fit(X, basis, sat, reg, bounds, cfg)
    extra = {
        "fit": {
            "converged": result.converged,
            "iterations": result.iterations,
            "objective_trace": result.objective_trace,
            "lambda": lam,
            "lambda_source": lam_src,
            "nu_fitted": result.fit_nu,
        }
    }
    sio.write_model_json(args.out, result.model, extra=extra)
    _manifest(args, args.out, t0, inputs=[args.counts])
    return 0


def cmd_eval(args):
    t0 = time.time()
    model = sio.read_model_json(args.model)
    X = sio.read_counts_csv(args.counts)
    value = evaluate_loglik(model, X)
    baseline = evaluate_loglik(baseline_constant(X, model.basis, model.saturation), X)
    out = {"log_likelihood": value, "constant_baseline": baseline}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _manifest(args, args.out, t0, inputs=[args.model, args.counts])
    else:
        sys.stdout.write(text)
    return 0


def cmd_theory(args):
    t0 = time.time()
    model = sio.read_model_json(args.model)
    r_min, r_max = rate_bounds(model)
    U = model.basis.tau * model.saturation.u
    report = th.theory_report(
        args.reg,
        M=model.M,
        T=args.T,
        R_min=r_min,
        R_max=r_max,
        u=model.saturation.u,
        U=U,
        p=args.p,
        s=args.s,
        s_G=args.s_G,
        r=args.r,
        D=args.D,
        C=args.C,
        lambda_mode=args.lambda_mode,
        rho_counts=tuple(args.rho) if args.rho else None,
        nu_fitted=False,
    )
    with open(args.out, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    _manifest(args, args.out, t0, inputs=[args.model])
    return 0


def cmd_heatmap(args):
    t0 = time.time()
    a_grid = _parse_grid(args.amax)
    u_grid = _parse_grid(args.u)
    values, contour = th.kappa_heatmap(
        np.asarray(a_grid),
        np.asarray(u_grid),
        nu_max=args.nu_max,
        alpha=args.alpha,
        contour_level=args.contour,
    )
    rows = []
    for i, u in enumerate(u_grid):
        for j, a in enumerate(a_grid):
            rows.append({"u": float(u), "a_max": float(a), "kappa": float(values[i, j])})
    sio.write_table_csv(args.out, rows, ["u", "a_max", "kappa"])
    outputs = [args.out]
    if args.contour is not None:
        cpath = str(args.out).rsplit(".", 1)[0] + "_contour.csv"
        sio.write_table_csv(
            cpath,
            [{"u": u, "a_max": a} for u, a in contour],
            ["u", "a_max"],
        )
        outputs.append(cpath)
    _manifest(args, args.out, t0, outputs=outputs)
    return 0


def cmd_sweep(args):
    t0 = time.time()
    params = [int(v) for v in _parse_grid(args.s if args.design == "sparse" else args.r)]
    T_grid = [int(v) for v in _parse_grid(args.T)]
    result = sweep_mse(
        args.design,
        params,
        T_grid,
        args.trials,
        lam_rule=args.lam,
        M=args.M,
        alpha=args.alpha,
        u=args.clip,
        seed=_resolve_seed(args),
        threads=args.threads,
    )
    name = result.cell_keys[0]
    fields = [name, "T", "trial", "lambda", "mse", "clip_rate", "converged"]
    sio.write_table_csv(args.out, result.records, fields)
    stats_path = str(args.out).rsplit(".", 1)[0] + "_stats.csv"
    stats = result.cell_stats()
    sio.write_table_csv(
        stats_path,
        stats,
        [name, "T", "trials", "failed", "median_mse", "std_mse", "frac_above", "frac_below", "mean_clip_rate"],
    )
    _manifest(args, args.out, t0, outputs=[args.out, stats_path])
    return 0


def cmd_phase(args):
    t0 = time.time()
    result = phase_transition(
        args.design.split(","),
        _parse_grid(args.amax),
        _parse_grid(args.u),
        args.trials,
        M=args.M,
        T=args.T,
        alpha=args.alpha,
        seed=_resolve_seed(args),
        threads=args.threads,
        contour_level=args.contour,
    )
    fields = ["design", "a_max", "u", "trial", "mse", "clip_rate", "converged"]
    sio.write_table_csv(args.out, result.records, fields)
    stats_path = str(args.out).rsplit(".", 1)[0] + "_stats.csv"
    sio.write_table_csv(
        stats_path,
        result.cell_stats(),
        ["design", "a_max", "u", "trials", "failed", "median_mse", "std_mse", "frac_above", "frac_below", "mean_clip_rate"],
    )
    _manifest(args, args.out, t0, outputs=[args.out, stats_path])
    return 0


def cmd_discretize(args):
    t0 = time.time()
    log = sio.read_events_csv(args.events, M=args.M, horizon=args.horizon)
    X = discretize(log, args.delta)
    sio.write_counts_csv(args.out, X)
    _manifest(args, args.out, t0, inputs=[args.events])
    return 0


def cmd_cluster(args):
    t0 = time.time()
    model = sio.read_model_json(args.model)
    labels = spectral_cluster(model.A, args.k, seed=_resolve_seed(args))
    sio.write_table_csv(
        args.out,
        [{"node": m, "label": int(lab)} for m, lab in enumerate(labels)],
        ["node", "label"],
    )
    _manifest(args, args.out, t0, inputs=[args.model])
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="seppnet",
        description="Saturated self-exciting Poisson network processes",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("simulate", help="draw counts from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=0)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="generate a ground-truth model")
    p.add_argument("--kind", required=True, choices=["sparse", "block", "lowrank", "hub"])
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--s", type=int, default=0)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--s-G", dest="s_G", type=int, default=0)
    p.add_argument("--a-max", dest="a_max", type=float, default=0.3)
    p.add_argument("--two-rows", dest="two_rows", action="store_true")
    p.add_argument("--basis", default="geometric:0.25")
    p.add_argument("--clip", type=float, default=6)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("fit", help="regularized maximum-likelihood fit")
    p.add_argument("--counts", required=True)
    p.add_argument("--basis", default="geometric:0.25")
    p.add_argument("--clip", type=float, default=6)
    p.add_argument("--reg", default="l1", choices=["l1", "group_column", "nuclear", "l1_plus_nuclear", "none"])
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--lambda2", dest="lam2", type=float, default=None)
    p.add_argument("--a-max", dest="a_max", type=float, default=10.0)
    p.add_argument("--a-min", dest="a_min", type=float, default=10.0)
    p.add_argument("--nu-min", dest="nu_min", type=float, default=-20.0)
    p.add_argument("--nu-max", dest="nu_max", type=float, default=20.0)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=5000)
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-8)
    p.add_argument("--project", action="store_true")
    p.add_argument("--fit-nu", dest="fit_nu", action="store_true")
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="test-set log-likelihood of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--out", default=None)
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("theory", help="constants and error bounds")
    p.add_argument("--model", required=True)
    p.add_argument("--reg", default="l1", choices=["l1", "group_column", "nuclear"])
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--s-G", dest="s_G", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--rho", type=int, nargs=3, default=None, metavar=("P", "C", "S"))
    p.add_argument("--lambda-mode", dest="lambda_mode", default="practical", choices=["practical", "theory"])
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("heatmap", help="clipping-severity table and contour")
    p.add_argument("--amax", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--nu-max", dest="nu_max", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--contour", type=float, default=None)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", help="error scaling over (s or r, T)")
    p.add_argument("--design", default="sparse", choices=["sparse", "lowrank"])
    p.add_argument("--s", default="10")
    p.add_argument("--r", default="1")
    p.add_argument("--T", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--M", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--clip", type=float, default=6)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("phase", help="accuracy phase transition over a_max")
    p.add_argument("--design", default="block")
    p.add_argument("--amax", required=True)
    p.add_argument("--u", default="6")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--M", type=int, default=50)
    p.add_argument("--T", type=int, default=400)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--contour", type=float, default=0.01)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("discretize", help="bin an event log into counts")
    p.add_argument("--events", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("cluster", help="spectral clustering of a learned network")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_cluster)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except InputFormatError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"E_FILE_NOT_FOUND: {e}", file=sys.stderr)
        return 3
    except ParameterError as e:
        print(f"E_PARAMETER: {e}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"E_NUMERIC: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
