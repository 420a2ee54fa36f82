"""Command-line front end: generate, check, solve, report.

Exit codes: 0 success, 1 check or solve failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis, gradient, hessian, iojson, oracle, solver
from .generate import SplitMix64, make_instance, perturbed_start, random_matrix, rescale_spectral
from .model import (
    ProblemSpec,
    dense_cap,
    forward_cache,
    loss,
)

CHECK_LEVELS = ("grad", "hessian", "bounds", "psd", "lipschitz", "all")


@dataclass(frozen=True)
class ExperimentConfig:
    """One harness run: instance seed and shape, solver selection, output."""

    seed: int = 0
    n: int = 3
    d: int = 2
    r_target: float = 1.2
    gamma_mode: str = "explicit"
    gamma: float = 0.0
    init_radius: float = 0.01
    solver: str = "newton"
    eps: float = 1e-10
    max_iter: int = 100
    eta: float = 0.05
    output_dir: str = "."

    def __post_init__(self):
        if self.n * self.d > dense_cap():
            raise ValueError(
                f"n*d = {self.n * self.d} exceeds the dense cap {dense_cap()}")
        if self.init_radius < 0:
            raise ValueError("init_radius must be nonnegative")


class UsageError(Exception):
    pass


def _parse_gamma(text: str) -> tuple[str, float]:
    if text == "auto":
        return "auto", 0.0
    try:
        return "explicit", float(text)
    except ValueError as exc:
        raise UsageError(f"--gamma must be 'auto' or a float, got {text!r}") from exc


def _fmt(x: float) -> str:
    return iojson.format_float(float(x))


def cmd_generate(args) -> int:
    mode, gamma = _parse_gamma(args.gamma)
    try:
        cfg = ExperimentConfig(seed=args.seed, n=args.n, d=args.d,
                               r_target=args.r_target, gamma_mode=mode,
                               gamma=gamma, output_dir=args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    spec, x_true = make_instance(cfg.seed, cfg.n, cfg.d, cfg.r_target, gamma=0.0)
    if mode == "auto":
        r_eff = analysis.effective_bound_constant(spec, x_true)
        gamma = analysis.choose_gamma(cfg.n, cfg.d, r_eff)
    spec = spec.with_gamma(gamma)
    os.makedirs(cfg.output_dir, exist_ok=True)
    iojson.write_problem(spec, os.path.join(cfg.output_dir, "problem.json"))
    iojson.write_matrix(x_true, os.path.join(cfg.output_dir, "x_true.json"))
    print(f"wrote problem.json and x_true.json to {cfg.output_dir} "
          f"(seed={cfg.seed}, n={cfg.n}, d={cfg.d}, gamma={_fmt(gamma)})")
    return 0


def _sample_x(spec: ProblemSpec, seed: int) -> np.ndarray:
    # decorrelate from the instance generator's stream so the probe never
    # lands on the synthesized minimizer
    gen = SplitMix64(SplitMix64(seed).next_u64())
    return rescale_spectral(random_matrix(gen, spec.d, spec.n), 1.2)


def _check_entries(spec: ProblemSpec, X, level: str, seed: int):
    """Run the selected certification checks; yields result dicts."""
    cache = forward_cache(spec, X)
    results = []

    def add(name, passed, detail):
        results.append({"check": name, "pass": bool(passed), **detail})

    if level in ("grad", "all"):
        cfg = oracle.FdConfig(tol_abs=1e-6, tol_rel=1e-6)
        rep = oracle.check(
            gradient.grad_L(cache, spec, X),
            oracle.fd_grad(lambda Y: loss(spec, Y), X, cfg),
            cfg, target="grad_L")
        add("grad_L_vs_fd", rep.passed,
            {"max_abs_err": rep.max_abs_err, "max_rel_err": rep.max_rel_err,
             "worst_index": list(rep.worst_index),
             "tol_abs": cfg.tol_abs, "tol_rel": cfg.tol_rel})
    if level in ("hessian", "all"):
        cfg = oracle.FdConfig(tol_abs=1e-4, tol_rel=1e-4)
        H = hessian.hessian_L(cache, spec, X)
        rep = oracle.check(H, oracle.fd_hessian(lambda Y: loss(spec, Y), X, cfg),
                           cfg, target="hessian_L")
        add("hessian_L_vs_fd", rep.passed,
            {"max_abs_err": rep.max_abs_err, "worst_index": list(rep.worst_index),
             "tol_abs": cfg.tol_abs, "tol_rel": cfg.tol_rel})
        asym = float(np.abs(H - H.T).max())
        tol = 1e-8 * (1.0 + float(np.abs(H).max()))
        add("hessian_L_symmetry", asym <= tol, {"asymmetry": asym, "tol": tol})
        worst = 0.0
        for i0 in range(spec.n):
            for j0 in range(spec.d):
                Hc = hessian.hessian_c(cache, spec, i0, j0)
                for i1 in range(spec.n):
                    for i2 in range(spec.n):
                        for j1 in range(spec.d):
                            for j2 in range(spec.d):
                                entry = hessian.d2c_entry(
                                    cache, spec, i0, j0, i1, j1, i2, j2)
                                worst = max(worst, abs(
                                    entry - Hc[i1 * spec.d + j1, i2 * spec.d + j2]))
        add("hessian_block_entry_equiv", worst <= 1e-10, {"max_abs_diff": worst})
    if level in ("bounds", "all"):
        rep = analysis.bound_suite(cache, spec, X)
        add("bound_suite", rep.passed,
            {"r_eff": rep.r_eff,
             "checks": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs,
                         "pass": c.passed, "kind": c.kind}
                        for c in rep.checks]})
    if level in ("psd", "all"):
        rep = analysis.psd_floor(spec, X)
        add("psd_floor", rep.passed and rep.hessian_c_passed,
            {"lambda_min": rep.lambda_min, "floor": rep.floor,
             "hessian_c_norm_max": rep.hessian_c_norm_max,
             "hessian_c_bound": rep.hessian_c_bound})
        gamma = analysis.choose_gamma(spec.n, spec.d, rep.r_eff)
        total = hessian.hessian_L(forward_cache(spec.with_gamma(gamma), X),
                                  spec.with_gamma(gamma), X)
        lam = float(np.linalg.eigvalsh(0.5 * (total + total.T)).min())
        add("psd_with_auto_gamma", lam > 0.0, {"lambda_min": lam, "gamma": gamma})
    if level in ("lipschitz", "all"):
        gen = SplitMix64(seed ^ 0x5EED)
        pairs = []
        for _ in range(3):
            A = rescale_spectral(random_matrix(gen, spec.d, spec.n), 1.2)
            Bm = rescale_spectral(random_matrix(gen, spec.d, spec.n), 1.2)
            pairs.append((A, Bm))
        rep = analysis.lipschitz_probe(spec, pairs)
        add("lipschitz_probe", rep.passed,
            {"r_eff": rep.r_eff,
             "checks": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs,
                         "pass": c.passed, "kind": c.kind}
                        for c in rep.checks]})
    return results


def cmd_check(args) -> int:
    try:
        spec = iojson.read_problem(args.problem)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot read problem: {exc}", file=sys.stderr)
        return 2
    meta = {"problem": args.problem, "level": args.level}
    if args.x is not None:
        try:
            X = iojson.read_matrix(args.x)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            print(f"error: cannot read X: {exc}", file=sys.stderr)
            return 2
        if X.shape != (spec.d, spec.n):
            print(f"error: X shape {X.shape} does not match problem "
                  f"({spec.d}, {spec.n})", file=sys.stderr)
            return 2
        meta["x_source"] = args.x
    else:
        X = _sample_x(spec, args.seed)
        meta["x_source"] = f"seed:{args.seed}"
    results = _check_entries(spec, X, args.level, args.seed)
    ok = all(r["pass"] for r in results)
    print(json.dumps({"meta": meta, "results": results, "pass": ok},
                     sort_keys=True, indent=2))
    return 0 if ok else 1


def _parse_init(text: str):
    if text.startswith("file:"):
        return ("file", text[5:])
    if text.startswith("perturb:"):
        try:
            return ("perturb", float(text[8:]))
        except ValueError as exc:
            raise UsageError(f"bad perturbation radius in {text!r}") from exc
    raise UsageError("--init must be file:<path> or perturb:<radius>")


def cmd_solve(args) -> int:
    try:
        spec = iojson.read_problem(args.problem)
        init = _parse_init(args.init)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot read problem: {exc}", file=sys.stderr)
        return 2
    mode, gamma = _parse_gamma(args.gamma) if args.gamma is not None else (None, None)
    if mode == "explicit":
        spec = spec.with_gamma(gamma)

    problem_dir = os.path.dirname(os.path.abspath(args.problem))
    x_true = None
    true_path = os.path.join(problem_dir, "x_true.json")
    if os.path.exists(true_path):
        x_true = iojson.read_matrix(true_path)

    if init[0] == "file":
        try:
            X0 = iojson.read_matrix(init[1])
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            print(f"error: cannot read init file: {exc}", file=sys.stderr)
            return 2
    else:
        if x_true is None:
            print("error: perturb init requires x_true.json next to the problem",
                  file=sys.stderr)
            return 2
        X0 = perturbed_start(x_true, init[1], args.seed)

    if mode == "auto":
        r_eff = analysis.effective_bound_constant(spec, X0)
        spec = spec.with_gamma(analysis.choose_gamma(spec.n, spec.d, r_eff))

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    meta = {"problem": args.problem, "solver": args.solver, "seed": args.seed,
            "init": args.init, "gamma_mode": mode or "problem"}
    if args.solver == "newton":
        cfg = solver.NewtonConfig(eps=args.eps, max_iter=args.max_iter)
        X_out, records, status = solver.newton_solve(spec, X0, cfg)
    else:
        X_out, records, status = solver.gd_solve(spec, X0, args.eta,
                                                 args.max_iter, eps=args.eps)
    final_loss = loss(spec, X_out)
    cache = forward_cache(spec, X_out)
    gn = float(np.linalg.norm(gradient.grad_L(cache, spec, X_out)))
    meta["status"] = status
    meta["iterations"] = len(records)
    meta["final_loss"] = final_loss
    meta["final_grad_norm"] = gn
    if x_true is not None:
        meta["distance_to_truth"] = solver.distance_to(X_out, x_true)
    iojson.write_matrix(X_out, os.path.join(out_dir, "x_out.json"))
    iojson.write_run_log(os.path.join(out_dir, "run.jsonl"), records, meta=meta)
    print(f"status={status} iterations={len(records)} "
          f"final_loss={_fmt(final_loss)} grad_norm={_fmt(gn)}"
          + (f" distance={_fmt(meta['distance_to_truth'])}" if x_true is not None else ""))
    if status == solver.NUMERICAL_FAILURE and records:
        last = records[-1]
        print(f"last record: iter={last.iter} loss={_fmt(last.loss)} "
              f"grad_norm={_fmt(last.grad_norm)}", file=sys.stderr)
    return 0 if status == solver.CONVERGED else 1


_REPORT_COLUMNS = ("instance", "solver", "iterations", "final_loss",
                   "final_grad_norm", "distance", "wall_time_ms")


def _report_row(path: str):
    meta, records, skipped = iojson.read_run_log(path)
    if skipped:
        print(f"warning: {path}: skipped {skipped} malformed line(s)",
              file=sys.stderr)
    if not records and not meta:
        return None
    last = records[-1] if records else {}
    return {
        "instance": str(meta.get("problem", "")),
        "solver": str(meta.get("solver", "")),
        "iterations": str(meta.get("iterations", len(records))),
        "final_loss": _fmt(meta["final_loss"]) if "final_loss" in meta
        else (_fmt(last.get("loss", float("nan"))) if records else ""),
        "final_grad_norm": _fmt(meta["final_grad_norm"]) if "final_grad_norm" in meta
        else (_fmt(last.get("grad_norm", float("nan"))) if records else ""),
        "distance": _fmt(meta["distance_to_truth"])
        if "distance_to_truth" in meta else "",
        "wall_time_ms": "",  # timing never persisted; see RunRecord
    }


def cmd_report(args) -> int:
    rows = []
    for path in args.runs:
        try:
            row = _report_row(path)
        except OSError as exc:
            print(f"warning: cannot read {path}: {exc}", file=sys.stderr)
            continue
        if row is not None:
            rows.append(row)
    lines = [",".join(_REPORT_COLUMNS)]
    lines += [",".join(row[c] for c in _REPORT_COLUMNS) for row in rows]
    csv_text = "\n".join(lines) + "\n"
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(csv_text)
    print(csv_text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="attninv",
                                description="attention-input recovery harness")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthesized instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--r-target", type=float, default=1.2)
    g.add_argument("--gamma", default="0.0", help="'auto' or a float")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("check", help="run derivative/bound/psd certification")
    c.add_argument("--problem", required=True)
    c.add_argument("--x", default=None, help="optional input matrix file")
    c.add_argument("--seed", type=int, default=0,
                   help="seed for the sampled X when --x is omitted")
    c.add_argument("--level", choices=CHECK_LEVELS, default="all")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="recover X from a problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--init", required=True, help="file:<path> or perturb:<radius>")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--solver", choices=("newton", "gd"), default="newton")
    s.add_argument("--eps", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--eta", type=float, default=0.05)
    s.add_argument("--gamma", default=None, help="'auto' or a float override")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("report", help="summarize run logs")
    r.add_argument("runs", nargs="*")
    r.add_argument("--csv", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
