"""Named experiment suites with their invariant checks.

A suite takes a fully resolved parameter dict, runs its cells (optionally on a
thread pool; results are collected in cell order, so output never depends on
scheduling) and returns the reports together with pass/fail checks.
"""

from __future__ import annotations

import copy
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from schatten_lab import experiments as ex
from schatten_lab.funcalc import (
    GENERAL,
    DegenerateSpectrumError,
    divided_difference_symbol,
    positive_part,
    split_monotone,
    stock_functions,
)
from schatten_lab.kernel import (
    DEFAULT_BUILD,
    RESIDUAL_THRESHOLD,
    build_kernel,
    kernel_moment,
    representation_residuals,
    weighted_moment,
)
from schatten_lab.schur import EstimatorConfig, estimate_norm

P_GRID = [1.1, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0]
N_GRID = [2, 4, 8, 16]
S_GRID = [-20.0, -10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0, 20.0]
CHAIN_SLACK = 0.05


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class SuiteResult:
    suite: str
    params: dict
    reports: list[ex.ExperimentReport] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


DEFAULTS: dict[str, dict] = {
    "lipschitz": {
        "functions": list(stock_functions()),
        "p_grid": P_GRID,
        "n_grid": N_GRID,
        "trials": 100,
        "seed": 0,
    },
    "theorem2": {
        "functions": ["identity", "positive-part", "absolute-value+", "absolute-value-", "piecewise-linear+",
                      "piecewise-linear-", "sine+", "sine-"],
        "p_grid": P_GRID,
        "n_grid": N_GRID,
        "seed": 0,
        "estimator": {},
    },
    "lemma-growth": {
        "p_grid": [1.5, 2.0, 4.0],
        "n_grid": [8, 16, 32],
        "s_grid": S_GRID,
        "growth_check_p": [1.5, 2.0, 4.0],
        "growth_tolerance": 0.10,
        "seed": 0,
        "estimator": {},
    },
    "reconstruction": {"cases": 20, "n_max": 8, "tolerance": 1e-3, "kernel": dict(DEFAULT_BUILD), "seed": 0},
    "integer-reduction": {
        "sequences": 10,
        "s_values": [0.0, 1.0, 5.0, -3.5, 12.0],
        "p_values": [1.5, 3.0, 4.0],
        "restriction_cases": 20,
        "restriction_p": [1.5, 3.0],
        "seed": 0,
        "estimator": {},
    },
}
DEFAULTS["full"] = {
    "functions": list(stock_functions()),
    "p_grid": P_GRID,
    "n_grid": N_GRID,
    "trials": 100,
    "lemma_n_grid": [8, 16, 32],
    "s_grid": S_GRID,
    "growth_check_p": [1.5, 2.0, 4.0],
    "growth_tolerance": 0.10,
    "kernel": dict(DEFAULT_BUILD),
    "reconstruction_cases": 20,
    "sequences": 10,
    "restriction_cases": 20,
    "seed": 0,
    "estimator": {},
}
SUITES = tuple(DEFAULTS)


def resolve_params(suite: str, overrides: dict | None = None) -> dict:
    if suite not in DEFAULTS:
        raise KeyError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    params = copy.deepcopy(DEFAULTS[suite])
    for k, v in (overrides or {}).items():
        if k not in params:
            raise KeyError(f"suite {suite!r} has no parameter {k!r}")
        if isinstance(params[k], dict) and isinstance(v, dict):
            params[k].update(v)
        else:
            params[k] = v
    return params


def estimator_config(params: dict) -> EstimatorConfig:
    est = dict(params.get("estimator") or {})
    est.setdefault("seed", int(params.get("seed", 0)))
    return EstimatorConfig.from_dict(est)


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def theorem2_functions() -> dict:
    out = {"positive-part": positive_part()}
    for name, f in stock_functions().items():
        if f.monotone_flag == GENERAL:
            g1, g2 = split_monotone(f)
            out[f"{name}+"], out[f"{name}-"] = g1, g2
        else:
            out[name] = f
    return out


def spectrum_for(seed: int, n: int) -> np.ndarray:
    rng = ex.rng_for(seed, 13, n)
    while True:
        lam = np.sort(rng.uniform(-3.0, 3.0, n))
        if n == 1 or np.min(np.diff(lam)) > 1e-3:
            return lam


# --------------------------------------------------------------------------- pieces


def _lipschitz_cells(params: dict, threads: int):
    fs = stock_functions()
    for name in params["functions"]:
        if name not in fs:
            raise KeyError(f"unknown stock function {name!r}")
    cells = [(name, float(p), int(n)) for name in sorted(params["functions"]) for p in sorted(params["p_grid"])
             for n in sorted(params["n_grid"])]

    def run(cell):
        name, p, n = cell
        return cell, ex.lipschitz_ratio_experiment(fs[name], p, n, int(params["trials"]), int(params["seed"]))

    return _pmap(run, cells, threads)


def _lipschitz_report(results, params) -> tuple[ex.ExperimentReport, list[Check]]:
    rows, cells = [], []
    contraction_fail, identity_fail, coherence_fail = [], [], []
    for (name, p, n), rep in results:
        for r in rep.rows:
            rows.append({"function": name, "p": p, "n": n, **r})
        mx = rep.summary["max_ratio"]
        cells.append({"function": name, "p": p, "n": n, "max_ratio": mx, "worst_trial": rep.summary["worst_trial"]})
        ratios = [r["ratio"] for r in rep.rows if r["ratio"] is not None]
        if p == 2.0 and any(r > 1 + 1e-9 for r in ratios):
            contraction_fail.append(f"{name} n={n}: {max(ratios)!r}")
        if name == "identity" and any(abs(r - 1) > 1e-12 for r in ratios):
            identity_fail.append(f"n={n} p={p}")
        if mx is None or mx < 1 - 1e-9:
            coherence_fail.append(f"{name} p={p} n={n}: {mx!r}")
    checks = [
        Check("lipschitz: p=2 ratios <= 1 + 1e-9", not contraction_fail, "; ".join(contraction_fail)),
        Check("lipschitz: identity ratios = 1 within 1e-12", not identity_fail, "; ".join(identity_fail)),
        Check("lipschitz: max ratio >= 1 - 1e-9 (identity-direction trial)", not coherence_fail,
              "; ".join(coherence_fail)),
    ]
    summary = {"cells": cells, "checks": [c.to_dict() for c in checks]}
    return ex.ExperimentReport("lipschitz", params, rows, summary), checks


def _growth_fits(p_grid, n_grid, s_grid, cfg, threads):
    cells = [(float(p), int(n)) for p in sorted(p_grid) for n in sorted(n_grid)]
    return _pmap(lambda c: ex.lemma_growth_experiment(c[0], c[1], s_grid, cfg), cells, threads)


def _growth_checks(fits, check_ps, tolerance) -> list[Check]:
    by_p: dict[float, list] = {}
    for fit in fits:
        by_p.setdefault(fit.p, []).append(fit)
    p2_fail, s0_fail, growth_fail, growth_detail = [], [], [], []
    for fit in fits:
        for r in fit.rows:
            if fit.p == 2.0 and abs(r["estimate_lower_bound"] - 1.0) > 1e-6:
                p2_fail.append(f"n={fit.n} s={r['s']}")
            if r["s"] == 0.0 and not (1 - 1e-9 <= r["estimate_lower_bound"] <= 2 + 1e-9):
                s0_fail.append(f"p={fit.p} n={fit.n}: {r['estimate_lower_bound']!r}")
    for p, group in sorted(by_p.items()):
        group = sorted(group, key=lambda f: f.n)
        if len(group) < 2 or not any(math.isclose(p, c) for c in check_ps):
            continue
        prev, last = group[-2], group[-1]
        growth = last.slope_constant / prev.slope_constant - 1.0
        growth_detail.append(f"p={p}: K({prev.n})={prev.slope_constant:.6g} K({last.n})={last.slope_constant:.6g} "
                             f"growth={growth:+.3%}")
        if not (math.isfinite(last.slope_constant) and growth < tolerance):
            growth_fail.append(f"p={p}")
    return [
        Check("lemma-growth: p=2 estimates = 1 within 1e-6", not p2_fail, "; ".join(p2_fail)),
        Check("lemma-growth: s=0 estimates in [1, 2]", not s0_fail, "; ".join(s0_fail)),
        Check(f"lemma-growth: K_p(n) grows < {tolerance:.0%} between the two largest n", not growth_fail,
              "; ".join(growth_detail)),
    ]


def _growth_report(fits, params, checks) -> ex.ExperimentReport:
    rows = [r for fit in fits for r in fit.rows]
    summary = {
        "fits": [{"p": f.p, "n": f.n, "K_hat_lower_bound": f.slope_constant} for f in fits],
        "note": "estimates are lower bounds; K_hat is an empirical max-ratio fit",
        "checks": [c.to_dict() for c in checks],
    }
    return ex.ExperimentReport("lemma-growth", params, rows, summary)


def _kernel_part(kparams: dict) -> tuple[ex.ExperimentReport, list[Check], object]:
    K = build_kernel(**kparams)
    res = representation_residuals(K)
    max_res = max(r["abs_error"] for r in res)
    max_im = max(abs(r["im"]) for r in res)
    fine = build_kernel(kparams["x_extent"], kparams["x_step"], 2 * kparams["s_extent"], kparams["s_step"] / 2)
    moments = {f"m{m}": kernel_moment(K, m) for m in range(5)}
    moments["weighted"] = weighted_moment(K)
    fine_moments = {f"m{m}": kernel_moment(fine, m) for m in range(5)}
    fine_moments["weighted"] = weighted_moment(fine)
    changes = {k: abs(fine_moments[k] - v) / v for k, v in moments.items()}
    checks = [
        Check(f"kernel: max representation residual <= {RESIDUAL_THRESHOLD:g}", max_res <= RESIDUAL_THRESHOLD,
              f"max residual {max_res:.3e}"),
        Check("kernel: imaginary residue <= 1e-8", max_im <= 1e-8, f"{max_im:.3e}"),
        Check("kernel: moments stable to < 1% under refinement",
              all(math.isfinite(v) for v in moments.values()) and max(changes.values()) < 0.01,
              ", ".join(f"{k}: {v:.2e}" for k, v in changes.items())),
        Check("kernel: tail |g(ends)| <= 1e-10 max|g|", K.tail_ratio() <= 1e-10, f"{K.tail_ratio():.3e}"),
        Check("kernel: conjugate symmetry <= 1e-10", K.conjugate_symmetry_error() <= 1e-10,
              f"{K.conjugate_symmetry_error():.3e}"),
    ]
    summary = {"build_params": K.build_params, "moments": moments, "refined_moments": fine_moments,
               "max_residual": max_res, "checks": [c.to_dict() for c in checks]}
    return ex.ExperimentReport("kernel", kparams, res, summary), checks, K


def _reconstruction_part(cases, seed, n_max, tol, K, threads):
    rows = _pmap(lambda i: ex.reconstruction_case(i, seed, K, n_max), range(cases), threads)
    worst = max((r["relative_error"] for r in rows), default=0.0)
    check = Check(f"reconstruction: relative error <= {tol:g}", worst <= tol, f"worst {worst:.3e}")
    return rows, check


def _reduction_part(params, cfg, threads):
    seed = int(params["seed"])
    rng = ex.rng_for(seed, 17)
    s_values = params.get("s_values", DEFAULTS["integer-reduction"]["s_values"])
    p_values = params.get("p_values", DEFAULTS["integer-reduction"]["p_values"])
    jobs = []
    for i in range(int(params["sequences"])):
        mus = ex.random_rationals(rng, int(rng.integers(2, 6)))
        jobs.append((mus, float(s_values[i % len(s_values)]), float(p_values[i % len(p_values)])))
    red_rows = _pmap(lambda j: ex.integer_reduction_check(j[0], j[1], j[2], cfg), jobs, threads)
    restriction_p = params.get("restriction_p", DEFAULTS["integer-reduction"]["restriction_p"])
    res_rows = _pmap(
        lambda i: ex.restriction_case(i, seed, float(restriction_p[i % len(restriction_p)]), cfg),
        range(int(params["restriction_cases"])),
        threads,
    )
    checks = [
        Check("integer-reduction: entrywise identity <= 1e-12 and estimates equal within 1e-9",
              all(r["passed"] for r in red_rows),
              "; ".join(r["mus"] for r in red_rows if not r["passed"])),
        Check("restriction: restricted estimate <= full estimate + 2%", all(r["passed"] for r in res_rows),
              "; ".join(f"case {r['case']}" for r in res_rows if not r["passed"])),
    ]
    return red_rows, res_rows, checks


def _theorem2_rows(params, cfg, threads, cp_bounds=None):
    fs = theorem2_functions()
    for name in params["functions"]:
        if name not in fs:
            raise KeyError(f"unknown theorem2 function {name!r}; choose from {sorted(fs)}")
    cells = [(name, float(p), int(n)) for name in sorted(params["functions"]) for p in sorted(params["p_grid"])
             for n in sorted(params["n_grid"])]

    def run(cell):
        name, p, n = cell
        row = ex.theorem2_row(fs[name], spectrum_for(int(params["seed"]), n), p, cfg)
        row["function"] = name
        return row

    rows = _pmap(run, cells, threads)
    entry_fail = [f"{r['function']} n={r['n']}" for r in rows if not (r["min_entry"] >= 0 and r["max_entry"] <= 1)]
    p2_fail = [f"{r['function']} n={r['n']}" for r in rows
               if r["p"] == 2.0 and abs(r["estimate_lower_bound"] - r["exact_p2"]) > 1e-6]
    sound_fail = [f"{r['function']} p={r['p']} n={r['n']}" for r in rows
                  if abs(r["witness_ratio"] - r["estimate_lower_bound"]) > 1e-9 * max(r["estimate_lower_bound"], 1)]
    checks = [
        Check("theorem2: symbol entries in [0, 1]", not entry_fail, "; ".join(entry_fail)),
        Check("theorem2: p=2 estimate = max|phi| within 1e-6", not p2_fail, "; ".join(p2_fail)),
        Check("theorem2: witness reproduces the estimate", not sound_fail, "; ".join(sound_fail)),
    ]
    if cp_bounds is not None:
        over = []
        for r in rows:
            cp = cp_bounds.get(r["p"])
            r["cp_bound"] = cp
            if cp is not None and r["estimate_lower_bound"] > cp * (1 + CHAIN_SLACK):
                over.append(f"{r['function']} p={r['p']} n={r['n']}")
        checks.append(Check("theorem2: estimates <= C_p bound + 5%", not over, "; ".join(over)))
    return rows, checks


def chain_cell(name: str, p: float, n: int, lip: ex.ExperimentReport, cfg: EstimatorConfig) -> dict:
    """Middle term of the consistency chain for one ``(f, p, n)`` cell.

    The worst Lipschitz trial is re-embedded as a divided-difference multiplier
    on the joint spectrum of ``A`` and ``B``; its witness matrix is added as an
    extra start, so the estimate is at least the observed Lipschitz ratio.
    """
    f = stock_functions()[name]
    order = sorted((i for i, r in enumerate(lip.rows) if r["ratio"] is not None),
                   key=lambda i: (-lip.rows[i]["ratio"], i))
    seed = int(lip.parameters["seed"])
    for i in order:
        _, A, B = ex.trial_matrices(f, n, seed, lip.rows[i]["trial"])
        lam, X = ex.joint_spectrum_witness(f, A, B)
        try:
            phi = divided_difference_symbol(f, lam)
        except DegenerateSpectrumError:
            continue
        est = estimate_norm(phi, p, cfg, extra_starts=[X])
        return {"function": name, "p": p, "n": n, "max_lipschitz_ratio": lip.summary["max_ratio"],
                "chain_trial": lip.rows[i]["trial"], "theorem2_estimate": est.value,
                "symbol_size": lam.size, "monotone": f.monotone_flag != GENERAL}
    return {"function": name, "p": p, "n": n, "max_lipschitz_ratio": lip.summary["max_ratio"],
            "chain_trial": None, "theorem2_estimate": None, "symbol_size": None,
            "monotone": f.monotone_flag != GENERAL}


# --------------------------------------------------------------------------- suites


def run_suite(suite: str, params: dict, threads: int = 1) -> SuiteResult:
    params = resolve_params(suite, params)
    return _RUNNERS[suite](params, max(1, int(threads)))


def _run_lipschitz(params, threads):
    rep, checks = _lipschitz_report(_lipschitz_cells(params, threads), params)
    return SuiteResult("lipschitz", params, [rep], checks)


def _run_theorem2(params, threads):
    rows, checks = _theorem2_rows(params, estimator_config(params), threads)
    rep = ex.ExperimentReport("theorem2", params, rows, {"note": "estimates are lower bounds",
                                                         "checks": [c.to_dict() for c in checks]})
    return SuiteResult("theorem2", params, [rep], checks)


def _run_growth(params, threads):
    fits = _growth_fits(params["p_grid"], params["n_grid"], params["s_grid"], estimator_config(params), threads)
    checks = _growth_checks(fits, params["growth_check_p"], float(params["growth_tolerance"]))
    return SuiteResult("lemma-growth", params, [_growth_report(fits, params, checks)], checks)


def _run_reconstruction(params, threads):
    K = build_kernel(**params["kernel"])
    rows, check = _reconstruction_part(int(params["cases"]), int(params["seed"]), int(params["n_max"]),
                                       float(params["tolerance"]), K, threads)
    rep = ex.ExperimentReport("reconstruction", params, rows, {"checks": [check.to_dict()]})
    return SuiteResult("reconstruction", params, [rep], [check])


def _run_reduction(params, threads):
    red, res, checks = _reduction_part(params, estimator_config(params), threads)
    summary = {"checks": [c.to_dict() for c in checks]}
    return SuiteResult("integer-reduction", params, [
        ex.ExperimentReport("integer-reduction", params, red, summary),
        ex.ExperimentReport("restriction", params, res, summary),
    ], checks)


def _run_full(params, threads):
    cfg = estimator_config(params)
    reports, checks = [], []

    krep, kchecks, K = _kernel_part(params["kernel"])
    reports.append(krep)
    checks += kchecks

    lip_results = _lipschitz_cells(params, threads)
    lrep, lchecks = _lipschitz_report(lip_results, params)
    reports.append(lrep)
    checks += lchecks

    fits = _growth_fits(params["p_grid"], params["lemma_n_grid"], params["s_grid"], cfg, threads)
    gchecks = _growth_checks(fits, params["growth_check_p"], float(params["growth_tolerance"]))
    reports.append(_growth_report(fits, params, gchecks))
    checks += gchecks

    k_hat = {}
    for fit in fits:
        k_hat[fit.p] = max(k_hat.get(fit.p, 0.0), fit.slope_constant)
    cp = {p: ex.cp_bound_from_kernel(K, k) for p, k in k_hat.items()}

    chain_rows = _pmap(lambda item: chain_cell(item[0][0], item[0][1], item[0][2], item[1], cfg), lip_results,
                       threads)
    failures = []
    for r in chain_rows:
        r["K_hat"] = k_hat.get(r["p"])
        r["cp_bound"] = cp.get(r["p"])
        ok = (
            r["theorem2_estimate"] is not None
            and r["cp_bound"] is not None
            and r["max_lipschitz_ratio"] <= r["theorem2_estimate"] * (1 + CHAIN_SLACK)
            and r["theorem2_estimate"] <= r["cp_bound"] * (1 + CHAIN_SLACK)
        )
        r["passed"] = ok
        if not ok:
            failures.append(f"{r['function']} p={r['p']} n={r['n']}")
    chain_check = Check("consistency chain: lipschitz <= theorem2 + 5% <= C_p bound + 5%", not failures,
                        "; ".join(failures))
    checks.append(chain_check)
    reports.append(ex.ExperimentReport("consistency-chain", params, chain_rows,
                                       {"cp_bounds": {repr(p): v for p, v in sorted(cp.items())},
                                        "weighted_kernel_moment": weighted_moment(K),
                                        "note": "C_p bound is K_hat^2 * sum w|g|(1+|s|)^2 with empirical K_hat",
                                        "checks": [chain_check.to_dict()]}))

    t2_params = {"functions": DEFAULTS["theorem2"]["functions"], "p_grid": params["p_grid"],
                 "n_grid": params["n_grid"], "seed": params["seed"]}
    t2_rows, t2_checks = _theorem2_rows(t2_params, cfg, threads, cp)
    reports.append(ex.ExperimentReport("theorem2", params, t2_rows, {"checks": [c.to_dict() for c in t2_checks]}))
    checks += t2_checks

    rec_rows, rec_check = _reconstruction_part(int(params["reconstruction_cases"]), int(params["seed"]), 8, 1e-3, K,
                                               threads)
    reports.append(ex.ExperimentReport("reconstruction", params, rec_rows, {"checks": [rec_check.to_dict()]}))
    checks.append(rec_check)

    red, res, rchecks = _reduction_part(params, cfg, threads)
    reports.append(ex.ExperimentReport("integer-reduction", params, red, {"checks": [c.to_dict() for c in rchecks]}))
    reports.append(ex.ExperimentReport("restriction", params, res, {"checks": [c.to_dict() for c in rchecks]}))
    checks += rchecks
    return SuiteResult("full", params, reports, checks)


_RUNNERS = {
    "lipschitz": _run_lipschitz,
    "theorem2": _run_theorem2,
    "lemma-growth": _run_growth,
    "reconstruction": _run_reconstruction,
    "integer-reduction": _run_reduction,
    "full": _run_full,
}
