"""``ogl`` command line interface.

Exit codes: 0 success, 1 internal error, 2 bad input, 3 no convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    Dataset,
    SynthSpec,
    balanced_error_rate,
    load_groups,
    load_matrix_csv,
    load_vector,
    save_solution_csv,
    synth_overlap_dataset,
    write_synth,
)
from .errors import ConvergenceError, InputError
from .groups import PenaltyParams, group_stats, penalty_value
from .prox import ProxOptions, prox
from .solver import (
    DEFAULT_RHO_GRID,
    LeastSquaresLoss,
    SolverOptions,
    foglasso_solve,
    lambda_max,
    reg_path,
)

logger = logging.getLogger("ogl")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3


class Timer:
    def __init__(self):
        self.phases = {}

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = (time.perf_counter() - start) * 1000.0


def _threads():
    raw = os.environ.get("OGL_THREADS")
    if raw is None:
        return {"requested": None, "effective": 1}
    try:
        requested = int(raw)
    except ValueError:
        raise InputError(f"OGL_THREADS must be an integer, got {raw!r}") from None
    if requested < 1:
        raise InputError("OGL_THREADS must be >= 1")
    return {"requested": requested, "effective": 1}


def _base_report(args, argv, timer):
    options = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "tool": "ogl",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "options": options,
        "threads": _threads(),
        "timings_ms": timer.phases,
    }


def _solution_summary(x, gs, objective, result=None):
    nonzero_groups = [
        (gs.names[i] if gs.names is not None else i)
        for i, grp in enumerate(gs.groups)
        if np.any(x[grp] != 0)
    ]
    summary = {
        "nonzero_count": int(np.count_nonzero(x)),
        "nonzero_groups": nonzero_groups,
        "objective": objective,
    }
    if result is not None:
        summary.update(
            converged=result.converged,
            iterations=result.iterations,
            L_max=result.L_max,
        )
    return summary


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_solution(x, out):
    if out:
        save_solution_csv(out, x)
    else:
        save_solution_csv(sys.stdout, x)


def _load_problem(args, timer):
    with timer.phase("load"):
        A = load_matrix_csv(args.matrix)
        b = load_vector(args.labels)
        data = Dataset(A, b)
        gs = load_groups(args.groups, data.A.shape[1])
    return data, gs


def _solver_options(args):
    return SolverOptions(
        outer_tol=args.tol,
        gap_tol=args.gap_tol,
        max_outer=args.max_iter,
        max_inner=args.max_inner,
    )


def cmd_prox(args, argv):
    timer = Timer()
    with timer.phase("load"):
        v = load_matrix_csv(args.input).ravel()
        gs = load_groups(args.groups, v.size)
    params = PenaltyParams(args.l1, args.l2)
    with timer.phase("prox"):
        sol = prox(v, gs, params, ProxOptions(gap_tol=args.gap_tol, max_inner=args.max_inner))
    _emit_solution(sol.x, args.out)
    if args.report:
        report = _base_report(args, argv, timer)
        report["prox"] = {
            "gap": sol.gap,
            "converged": sol.converged,
            "inner_iterations": sol.inner_iterations,
            "p_reduced": sol.p_reduced,
            "g_reduced": sol.g_reduced,
            "zero_groups": np.flatnonzero(sol.zero_group_mask).tolist(),
            "gap_history": sol.report.gap_history if sol.report is not None else [0.0],
        }
        report["solution"] = _solution_summary(
            sol.x, gs, 0.5 * float(np.sum((sol.x - v) ** 2)) + penalty_value(sol.x, gs, params)
        )
        _write_json(args.report, report)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def _resolve_params(args, A, b):
    if args.rho is not None:
        if args.l2 is not None:
            raise InputError("--rho and --l1/--l2 are mutually exclusive")
        if not 0 < args.rho:
            raise InputError("--rho must be positive")
        lam = args.rho * lambda_max(A, b)
        return PenaltyParams(lam, lam)
    if args.l1 is None or args.l2 is None:
        raise InputError("give either --rho or both --l1 and --l2")
    return PenaltyParams(args.l1, args.l2)


def cmd_solve(args, argv):
    timer = Timer()
    data, gs = _load_problem(args, timer)
    params = _resolve_params(args, data.A, data.b)
    loss = LeastSquaresLoss(data.A, data.b)
    with timer.phase("solve"):
        res = foglasso_solve(loss, gs, params, _solver_options(args))
    _emit_solution(res.x, args.out)
    if args.report:
        report = _base_report(args, argv, timer)
        report["lambda1"] = params.lambda1
        report["lambda2"] = params.lambda2
        report["lambda1_max"] = lambda_max(data.A, data.b)
        report["telemetry"] = res.telemetry_arrays()
        report["solution"] = _solution_summary(res.x, gs, res.objective, res)
        _write_json(args.report, report)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _parse_grid(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"bad --rho-grid {text!r}") from None


def cmd_path(args, argv):
    timer = Timer()
    data, gs = _load_problem(args, timer)
    grid = _parse_grid(args.rho_grid) if args.rho_grid else list(DEFAULT_RHO_GRID)
    loss = LeastSquaresLoss(data.A, data.b)
    with timer.phase("path"):
        path = reg_path(loss, gs, grid, _solver_options(args), l2_ratio=args.l2_ratio)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = _base_report(args, argv, timer)
    summary["lambda1_max"] = path.lambda1_max
    summary["entries"] = []
    status = EXIT_OK
    for entry in path.entries:
        tag = f"rho_{entry.rho:.6g}"
        record = {"rho": entry.rho, "lambda1": entry.lambda1, "lambda2": entry.lambda2, "error": entry.error}
        if entry.ok:
            res = entry.result
            sol_path = out_dir / f"x_{tag}.csv"
            rep_path = out_dir / f"report_{tag}.json"
            save_solution_csv(sol_path, res.x)
            _write_json(rep_path, {
                "rho": entry.rho,
                "lambda1": entry.lambda1,
                "lambda2": entry.lambda2,
                "telemetry": res.telemetry_arrays(),
                "solution": _solution_summary(res.x, gs, res.objective, res),
            })
            record.update(solution=str(sol_path), report=str(rep_path),
                          nonzero_count=int(np.count_nonzero(res.x)), converged=res.converged)
            if not res.converged:
                status = EXIT_NOT_CONVERGED
        else:
            status = EXIT_NOT_CONVERGED
        summary["entries"].append(record)
    _write_json(out_dir / "path_report.json", summary)
    print(json.dumps([{k: e[k] for k in ("rho", "nonzero_count") if k in e} for e in summary["entries"]]))
    return status


def cmd_synth(args, argv):
    spec = SynthSpec(
        p=args.p,
        n=args.n,
        g=args.g,
        group_size=args.group_size,
        overlap=args.overlap,
        active_groups=args.active_groups,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    data, gs, x_true = synth_overlap_dataset(spec)
    paths = write_synth(args.out, data, gs, x_true)
    print(json.dumps(paths))
    return EXIT_OK


def cmd_eval(args, argv):
    pred = load_vector(args.pred)
    labels = load_vector(args.labels)
    print(f"{balanced_error_rate(pred, labels):.6f}")
    return EXIT_OK


def cmd_stats(args, argv):
    gs = load_groups(args.groups, args.p)
    print(json.dumps(group_stats(gs).as_dict()))
    return EXIT_OK


def _add_solver_flags(sp):
    sp.add_argument("--tol", type=float, default=1e-5, help="relative objective change to stop at")
    sp.add_argument("--gap-tol", type=float, default=1e-10, help="duality gap for the prox")
    sp.add_argument("--max-iter", type=int, default=10_000)
    sp.add_argument("--max-inner", type=int, default=100_000)


def build_parser():
    parser = argparse.ArgumentParser(prog="ogl", description="Overlapping group Lasso tools")
    parser.add_argument("--version", action="version", version=f"ogl {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prox", help="evaluate the proximal operator")
    sp.add_argument("--input", required=True, help="vector v (CSV)")
    sp.add_argument("--groups", required=True)
    sp.add_argument("--l1", type=float, required=True)
    sp.add_argument("--l2", type=float, required=True)
    sp.add_argument("--gap-tol", type=float, default=1e-10)
    sp.add_argument("--max-inner", type=int, default=100_000)
    sp.add_argument("--report")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_prox)

    sp = sub.add_parser("solve", help="solve one least-squares problem")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--groups", required=True)
    reg = sp.add_mutually_exclusive_group(required=True)
    reg.add_argument("--rho", type=float, help="lambda1 = lambda2 = rho * ||A^T b||_inf")
    reg.add_argument("--l1", type=float)
    sp.add_argument("--l2", type=float)
    _add_solver_flags(sp)
    sp.add_argument("--report")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("path", help="warm-started regularization path")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--groups", required=True)
    sp.add_argument("--rho-grid", help="comma-separated, strictly decreasing")
    sp.add_argument("--l2-ratio", type=float, default=1.0, help="lambda2 / lambda1 (0 gives plain Lasso)")
    sp.add_argument("--out-dir", default=".")
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_path)

    sp = sub.add_parser("synth", help="write a synthetic chain-group dataset")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--g", type=int, required=True)
    sp.add_argument("--group-size", type=int, required=True)
    sp.add_argument("--overlap", type=int, required=True)
    sp.add_argument("--active-groups", type=int, default=1)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("eval", help="balanced error rate of +/-1 predictions")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--labels", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stats", help="summary statistics of a group file")
    sp.add_argument("--groups", required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.set_defaults(func=cmd_stats)
    return parser


def run_command(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "synth" and args.n is None:
        args.n = args.p
    try:
        _threads()
        return args.func(args, argv)
    except FileNotFoundError as exc:
        print(f"ogl: error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, IsADirectoryError, PermissionError, UnicodeDecodeError) as exc:
        print(f"ogl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"ogl: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"ogl: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    sys.exit(run_command())
