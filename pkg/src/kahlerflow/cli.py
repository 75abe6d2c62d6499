"""Command line entry point: run | spectrum | curvop | compat | sweep.

Exit codes: 0 success, 1 other input error, 2 configuration or parse error,
3 numerical blow-up (partial artifacts written), 4 a residual or bound check
failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import compat, curvop2
from .config import RunConfig, dump_config, load_config
from .errors import BlowUpError, ConfigError, InputError, KahlerFlowError, ResidualExceeded
from .flow import initial_metric, run_flow
from .report import check_residuals, dumps, write_run_artifacts
from .spectral import holomorphic_kernel, lambda_min

log = logging.getLogger("kahlerflow")


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _emit(obj, out_dir, name, quiet):
    text = dumps(obj)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    if not quiet:
        sys.stdout.write(text)


def execute_run(cfg: RunConfig, out_dir):
    """Run one flow and write its artifacts; returns the summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    try:
        traj = run_flow(cfg)
    except BlowUpError as exc:
        partial = exc.last_state
        if partial is not None and len(partial) > 0:
            write_run_artifacts(partial, out, status="blowup", message=str(exc))
        raise
    return write_run_artifacts(traj, out)


def cmd_run(args):
    cfg = _config(args)
    summary = execute_run(cfg, args.out)
    if not args.quiet:
        keys = ("status", "converged", "converged_time", "Y_final", "lambda_inf", "rate_fit", "residual_failures")
        sys.stdout.write(dumps({k: summary[k] for k in keys}))
    check_residuals(summary)
    return 0


def cmd_spectrum(args):
    cfg = _config(args)
    m = initial_metric(cfg.N, cfg.coefficients, cfg.amplitude)
    rep = lambda_min(m, cfg.sector_cap)
    out = rep.to_dict()
    out["kernel_ok"] = rep.total_kernel_dim == 3
    if out["kernel_ok"]:
        out["kernel_sectors"] = sorted(V.k for V in holomorphic_kernel(m, report=rep).fields)
    _emit(out, args.out, "spectrum.json", args.quiet)
    if not out["kernel_ok"]:
        raise ResidualExceeded(f"kernel dimension {rep.total_kernel_dim} != 3")
    return 0


def _curvop_report(t, bound):
    op = curvop2.operator_matrix(t)
    ric_ok, two_ok = curvop2.condition_c(t)
    rep = {
        "scalar": t.scalar,
        "ricci_eigenvalues": np.linalg.eigvalsh(t.ricci).tolist(),
        "op_s_eigenvalues": op.op_s_eigenvalues().tolist(),
        "operator_eigenvalues": op.eigenvalues().tolist(),
        "ricci_nonneg": ric_ok,
        "two_nonneg": two_ok,
    }
    if ric_ok and two_ok:
        C = bound if bound is not None else max(t.scalar, 0.0)
        rep["bounds"] = curvop2.eigenvalue_bounds(t, C).to_dict()
        rep["pass"] = rep["bounds"]["pass"]
    else:
        rep["bounds"] = None
        rep["pass"] = False
    return rep


def cmd_curvop(args):
    if args.random:
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        C = args.bound if args.bound is not None else 10.0
        violations = 0
        for _ in range(args.random):
            r = curvop2.eigenvalue_bounds(curvop2.random_condition_c(rng, C), C)
            violations += not r.ok
        out = {"samples": args.random, "bound": C, "violations": violations, "pass": violations == 0}
    else:
        if not args.file:
            raise InputError("curvop needs a component file or --random N")
        try:
            text = Path(args.file).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.file}: {exc}") from exc
        try:
            t = curvop2.parse_components(text)
        except InputError as exc:
            raise ConfigError(str(exc)) from exc
        out = _curvop_report(t, args.bound)
    _emit(out, args.out, "curvop.json", args.quiet)
    if not out["pass"]:
        raise ResidualExceeded("curvature operator checks failed")
    return 0


def cmd_compat(args):
    try:
        data = yaml.safe_load(Path(args.file).read_text())
        g = np.array(data["g"], dtype=float)
        J = np.array(data["J"], dtype=float)
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read pair from {args.file}: {exc}") from exc
    res = compat.hermitian_compat_residual(g, J)
    out = {
        "residual": res,
        "j_norm_sq": float(np.max(compat.j_norm_sq(g, J))),
        "tolerance": args.tol,
        "compatible": res <= args.tol,
    }
    _emit(out, args.out, "compat.json", args.quiet)
    if not out["compatible"]:
        raise ResidualExceeded(f"compatibility residual {res:.3g} exceeds {args.tol:.3g}")
    return 0


def _sweep_one(job):
    path, out = job
    cfg = load_config(path)
    try:
        s = execute_run(cfg, out)
        code = 4 if s["residual_failures"] else 0
    except KahlerFlowError as exc:
        code = exc.exit_code
    return str(path), str(out), code


def cmd_sweep(args):
    if not args.config:
        raise ConfigError("sweep needs at least one --config")
    jobs = [(p, Path(args.out) / f"run_{i:03d}") for i, p in enumerate(args.config)]
    for p, _ in jobs:
        load_config(p)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    out = {"runs": [{"config": c, "out": o, "exit_code": e} for c, o, e in results]}
    _emit(out, args.out, "sweep.json", args.quiet)
    return max((e for *_, e in results), default=0)


def build_parser():
    p = argparse.ArgumentParser(prog="kahlerflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", type=str, default=None, help="YAML run configuration")
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("run", help="integrate the flow and write artifacts")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("spectrum", help="dbar spectrum of the initial metric")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("curvop", help="curvature-operator checks for a 16-component tensor")
    sp.add_argument("file", nargs="?", help="lines 'a b c d re [im]', indices 1 or 2")
    sp.add_argument("--bound", type=float, default=None, help="scalar bound C (default: R)")
    sp.add_argument("--random", type=int, default=0, help="check N random condition-(C) tensors")
    common(sp, config=False)
    sp.set_defaults(func=cmd_curvop)

    sp = sub.add_parser("compat", help="metric / complex-structure compatibility of a pair")
    sp.add_argument("file", help="YAML with matrices g and J")
    sp.add_argument("--tol", type=float, default=1e-10)
    common(sp, config=False)
    sp.set_defaults(func=cmd_compat)

    sp = sub.add_parser("sweep", help="run several configs into run_XXX subdirectories")
    sp.add_argument("--config", action="append", default=[], help="repeat for each run")
    sp.add_argument("--out", type=str, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.command == "run" and not args.out:
        args.out = "kahlerflow_out"
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return exc.exit_code
    except KahlerFlowError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
