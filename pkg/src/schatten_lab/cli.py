"""``schatten-lab``: kernel building, multiplier norm estimation and experiment suites.

Every output JSON echoes the resolved run config (command, seed, parameters);
feeding that JSON back through ``--config`` reproduces the outputs exactly.
The thread count and output directory are not part of the echo since they
never change results.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from schatten_lab import kernel as kern
from schatten_lab import reports
from schatten_lab.funcalc import GENERAL, divided_difference_symbol, parse_function, split_monotone, strictify
from schatten_lab.schur import (
    EstimatorConfig,
    OscillatorySpec,
    apply_multiplier,
    estimate_norm,
    oscillatory_symbol,
)
from schatten_lab.linalg import schatten_norm
from schatten_lab.suites import SUITES, resolve_params, run_suite

DEFAULT_OUT = "schatten-lab-out"


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    out: Path = Path(DEFAULT_OUT)
    threads: int = 1

    def echo(self) -> dict:
        return {"command": self.command, "seed": self.seed, "params": self.params}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"error: cannot read config {path}: {exc}")
    # Accept either a bare RunConfig or a report JSON that embeds one.
    return data.get("config", data)


def _out_dir(args, file_cfg: dict) -> Path:
    if args.out:
        return Path(args.out)
    if file_cfg.get("out"):
        return Path(file_cfg["out"])
    return Path(os.environ.get("SCHATTEN_LAB_OUT", DEFAULT_OUT))


def _base(args, command: str) -> tuple[RunConfig, dict]:
    file_cfg = _load_config(args.config)
    if file_cfg.get("command", command) != command:
        raise SystemExit(f"error: config is for command {file_cfg['command']!r}, not {command!r}")
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    threads = args.threads if args.threads is not None else int(file_cfg.get("threads", 1))
    cfg = RunConfig(command, seed, dict(file_cfg.get("params", {})), _out_dir(args, file_cfg), max(1, threads))
    return cfg, file_cfg


def _estimator_overrides(args) -> dict:
    est = {}
    if getattr(args, "starts", None) is not None:
        est["starts"] = args.starts
    if getattr(args, "max_iters", None) is not None:
        est["max_iters"] = args.max_iters
    if getattr(args, "tol", None) is not None:
        est["tol"] = args.tol
    return est


# --------------------------------------------------------------------------- kernel


def cmd_kernel(args) -> int:
    cfg, _ = _base(args, "kernel")
    build = dict(kern.DEFAULT_BUILD)
    build.update({k: float(v) for k, v in cfg.params.items() if k in build})
    for name in build:
        val = getattr(args, name)
        if val is not None:
            build[name] = float(val)
    cfg.params = build
    try:
        K = kern.build_kernel(**build)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = kern.representation_residuals(K)
    max_res = max(r["abs_error"] for r in table)
    ok = max_res <= kern.RESIDUAL_THRESHOLD

    stem = f"kernel-{reports.params_hash(cfg.echo())}"
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        with open(cfg.out / f"{stem}.csv", "w", newline="") as fh:
            kern.write_kernel_csv(K, fh)
        reports.write_rows_csv(cfg.out / f"{stem}-residuals.csv", table)
        summary = {
            "config": cfg.echo(),
            "build_params": K.build_params,
            "max_residual": max_res,
            "threshold": kern.RESIDUAL_THRESHOLD,
            "passed": ok,
            "moments": {f"m{m}": kern.kernel_moment(K, m) for m in range(5)},
            "weighted_moment": kern.weighted_moment(K),
            "tail_ratio": K.tail_ratio(),
        }
        (cfg.out / f"{stem}.json").write_text(reports.dumps(summary))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2

    print(f"{'ratio':>12}  {'abs_error':>12}")
    for r in table:
        print(f"{r['ratio']:12.6g}  {r['abs_error']:12.3e}")
    print(f"max residual {max_res:.3e} (threshold {kern.RESIDUAL_THRESHOLD:g}): {'PASS' if ok else 'FAIL'}")
    print(f"weighted moment sum w|g|(1+|s|)^2 = {summary['weighted_moment']:.10g}")
    print(f"wrote {cfg.out / stem}.csv")
    return 0 if ok else 1


# --------------------------------------------------------------------------- norm


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _symbol_from(params: dict) -> np.ndarray:
    source = params.get("source")
    if source == "file":
        return reports.read_matrix(Path(params["path"]))
    if source == "ones":
        n = int(params["n"])
        return np.ones((n, n), dtype=np.complex128)
    if source == "divided-difference":
        f = parse_function(params["function"])
        if params.get("strictify"):
            if f.monotone_flag == GENERAL:
                # Only monotone functions can be strictified; use the nondecreasing part (x + f)/2.
                f = split_monotone(f)[0]
            f = strictify(f, float(params["strictify"]))
        return divided_difference_symbol(f, params["lambdas"])
    if source == "oscillatory":
        return oscillatory_symbol(OscillatorySpec(tuple(params["mus"]), float(params["s"])))
    raise ValueError("no symbol given: use --symbol-file, --ones, --function/--lambdas or --mus/--s")


def cmd_norm(args) -> int:
    cfg, _ = _base(args, "norm")
    params = dict(cfg.params)
    if args.symbol_file:
        params.update(source="file", path=str(args.symbol_file))
    elif args.ones:
        params.update(source="ones", n=args.ones)
    elif args.function:
        if args.lambdas is None:
            print("error: --function needs --lambdas", file=sys.stderr)
            return 2
        params.update(source="divided-difference", function=args.function, lambdas=_floats(args.lambdas))
        if args.strictify:
            params["strictify"] = args.strictify
    elif args.mus:
        params.update(source="oscillatory", mus=_floats(args.mus), s=args.s if args.s is not None else 0.0)
    if args.p is not None:
        params["p"] = args.p
    est_cfg = dict(params.get("estimator", {}))
    est_cfg.update(_estimator_overrides(args))
    est_cfg["seed"] = cfg.seed
    params["estimator"] = est_cfg
    cfg.params = params

    try:
        phi = _symbol_from(params)
        p = float(params.get("p", 2.0))
        est = estimate_norm(phi, p, EstimatorConfig.from_dict(est_cfg))
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    roundtrip = schatten_norm(apply_multiplier(phi, est.witness), p) / schatten_norm(est.witness, p)
    ok = math.isclose(roundtrip, est.value, rel_tol=1e-9, abs_tol=1e-300)
    stem = f"norm-{reports.params_hash(cfg.echo())}"
    summary = {
        "config": cfg.echo(),
        "n": int(phi.shape[0]),
        "p": p,
        "value_lower_bound": est.value,
        "iterations": est.iterations,
        "starts": est.starts,
        "best_start": est.best_start,
        "converged": est.converged,
        "witness_roundtrip_ratio": roundtrip,
        "witness_check_passed": ok,
    }
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        reports.write_matrix(cfg.out / f"{stem}-witness.json", est.witness)
        (cfg.out / f"{stem}.json").write_text(reports.dumps(summary))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2
    print(f"value (lower bound) = {est.value!r}")
    print(f"p = {p!r}  n = {phi.shape[0]}  iterations = {est.iterations}  starts = {est.starts}  "
          f"converged = {est.converged}")
    print(f"witness round-trip ratio = {roundtrip!r}: {'PASS' if ok else 'FAIL'}")
    print(f"wrote {cfg.out / stem}-witness.json")
    return 0 if ok else 1


# --------------------------------------------------------------------------- experiment

_FLAG_KEYS = {
    "p": "p_grid",
    "n": "n_grid",
    "trials": "trials",
    "functions": "functions",
    "s_grid": "s_grid",
    "cases": ("cases", "reconstruction_cases"),
}


def cmd_experiment(args) -> int:
    cfg, _ = _base(args, "experiment")
    suite = args.suite
    params = dict(cfg.params)
    if params.get("suite", suite) != suite:
        print(f"error: config is for suite {params['suite']!r}", file=sys.stderr)
        return 2
    params.pop("suite", None)
    known = resolve_params(suite)
    for flag, keys in _FLAG_KEYS.items():
        val = getattr(args, flag)
        if val is None:
            continue
        keys = (keys,) if isinstance(keys, str) else keys
        target = next((k for k in keys if k in known), None)
        if target is None:
            print(f"error: --{flag.replace('_', '-')} does not apply to suite {suite!r}", file=sys.stderr)
            return 2
        if flag in ("p", "s_grid"):
            val = _floats(val)
        elif flag == "n":
            val = [int(v) for v in _floats(val)]
        elif flag == "functions":
            val = [v for v in val.replace(",", " ").split() if v]
        params[target] = val
    est = _estimator_overrides(args)
    if est:
        params["estimator"] = {**params.get("estimator", {}), **est}
    params["seed"] = cfg.seed
    try:
        resolved = resolve_params(suite, params)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    cfg.params = {"suite": suite, **resolved}

    t0 = time.perf_counter()
    result = run_suite(suite, resolved, cfg.threads)
    elapsed = time.perf_counter() - t0

    written = []
    try:
        for rep in result.reports:
            summary = dict(rep.summary)
            summary["config"] = cfg.echo()
            csv_path, json_path = reports.write_report(cfg.out, rep.experiment_id, rep.parameters, rep.rows, summary)
            written += [csv_path.name, json_path.name]
        suite_summary = {
            "config": cfg.echo(),
            "suite": suite,
            "passed": result.passed,
            "checks": [c.to_dict() for c in result.checks],
            "files": written,
        }
        summary_path = cfg.out / f"{suite}-summary-{reports.params_hash(cfg.echo())}.json"
        summary_path.write_text(reports.dumps(suite_summary))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2

    for c in result.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}" + (f"  ({c.detail})" if c.detail else ""))
    print(f"suite {suite}: {'PASS' if result.passed else 'FAIL'} in {elapsed:.1f}s; outputs in {cfg.out}")
    if not result.passed:
        print("failing rows:", file=sys.stderr)
        for c in result.checks:
            if not c.passed:
                print(f"  {c.name}: {c.detail}", file=sys.stderr)
    return 0 if result.passed else 1


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (an echoed config from any output also works)")
    common.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    common.add_argument("--out", default=None, help="output directory (default $SCHATTEN_LAB_OUT or ./schatten-lab-out)")
    common.add_argument("--threads", type=int, default=None, help="worker threads; results do not depend on it")

    estimator = argparse.ArgumentParser(add_help=False)
    estimator.add_argument("--starts", type=int, help="estimator starts (default 16)")
    estimator.add_argument("--max-iters", type=int, help="iteration cap per start (default 500)")
    estimator.add_argument("--tol", type=float, help="relative ratio improvement tolerance (default 1e-8)")

    parser = argparse.ArgumentParser(
        prog="schatten-lab",
        description="Schur multiplier norms, operator-Lipschitz ratios and the Fourier kernel on Schatten classes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="build the Fourier kernel and check its representation residuals")
    k.add_argument("--defaults", action="store_true", help="use the default grids")
    k.add_argument("--x-extent", dest="x_extent", type=float)
    k.add_argument("--x-step", dest="x_step", type=float)
    k.add_argument("--s-extent", dest="s_extent", type=float)
    k.add_argument("--s-step", dest="s_step", type=float)
    k.set_defaults(func=cmd_kernel)

    nm = sub.add_parser("norm", parents=[common, estimator], help="estimate an S^p -> S^p Schur multiplier norm")
    src = nm.add_mutually_exclusive_group()
    src.add_argument("--symbol-file", help="symbol as matrix JSON {n, re, im}")
    src.add_argument("--ones", type=int, metavar="N", help="all-ones N x N symbol")
    src.add_argument("--function", help="divided-difference symbol of a function: name or JSON descriptor")
    src.add_argument("--mus", help="oscillatory symbol |mu_k - mu_l|^{is} on these points")
    nm.add_argument("--lambdas", help="points for --function, e.g. '-2,-1,1,3'")
    nm.add_argument(
        "--strictify",
        type=float,
        nargs="?",
        const=1e-6,
        help="strictify with this epsilon (default 1e-6); non-monotone f is replaced by (x + f)/2 first",
    )
    nm.add_argument("--s", type=float, help="frequency for --mus")
    nm.add_argument("--p", type=float, help="exponent, 1 < p < inf")
    nm.set_defaults(func=cmd_norm)

    e = sub.add_parser("experiment", parents=[common, estimator], help="run an experiment suite")
    e.add_argument("suite", choices=SUITES)
    e.add_argument("--defaults", action="store_true", help="use the suite defaults")
    e.add_argument("--p", help="p grid, e.g. '1.5,2,4'")
    e.add_argument("--n", help="n grid, e.g. '4,8'")
    e.add_argument("--trials", type=int)
    e.add_argument("--functions", help="comma-separated function names")
    e.add_argument("--s-grid", dest="s_grid", help="s grid for the lemma-growth fit")
    e.add_argument("--cases", type=int, help="number of reconstruction cases")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
