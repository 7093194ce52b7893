"""Experiment drivers: Lipschitz ratios, multiplier norms, growth fits and the proof's reductions.

Every driver is a pure function of its parameters. Randomness comes from
PCG64 streams keyed by ``SeedSequence(seed, spawn_key=...)`` so that any row
can be regenerated from the report parameters alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from schatten_lab.funcalc import (
    GENERAL,
    NONDECREASING,
    ScalarFunction,
    apply_function,
    function_of,
    check_gaps,
    divided_difference_symbol,
    split_monotone,
    strictify,
)
from schatten_lab.kernel import KernelG, weighted_moment
from schatten_lab.linalg import (
    as_hermitian,
    as_matrix,
    hermitian_eig,
    lp_norm,
    random_complex,
    random_hermitian_from,
    schatten_norm,
    singular_values,
)
from schatten_lab.schur import (
    EstimatorConfig,
    NormEstimate,
    OscillatorySpec,
    apply_multiplier,
    estimate_norm,
    exact_norm_p2,
    oscillatory_symbol,
    restrict_symbol,
)

ENSEMBLES = ("gaussian", "rank-one", "commuting")
IDENTITY_STEP = 1e-5
SKIP_BELOW = 1e-12


@dataclass
class ExperimentReport:
    experiment_id: str
    parameters: dict
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


@dataclass
class FitResult:
    """Max-ratio fit of ``estimate(s) <= K (1 + |s|)``; ``slope_constant == max_ratio``."""

    p: float
    n: int
    slope_constant: float
    max_ratio: float
    residuals: list[float]
    rows: list[dict]


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)[0])


# --------------------------------------------------------------------------- Lipschitz ratios


def _steepest_point(f: ScalarFunction) -> float:
    # Closest-to-zero grid point where f is steepest across the whole trial window.
    width = 3 * IDENTITY_STEP
    grid = np.round(np.arange(-1000, 1001) * 0.01, 10)
    grid = grid[np.argsort(np.abs(grid), kind="stable")]
    slopes = np.abs(f(grid + width) - f(grid)) / width
    return float(grid[int(np.argmax(slopes >= slopes.max() - 1e-12))])


@lru_cache(maxsize=8192)
def lipschitz_trial(n: int, seed: int, index: int) -> tuple[str, np.ndarray, np.ndarray]:
    """Trial ``index`` of the Lipschitz-ratio ensemble: ``(ensemble, A, B)`` with ``B = A + D``.

    Index 0 is the per-function :func:`identity_direction_trial`; indices
    ``1, 2, ...`` cycle through Gaussian, rank-one and commuting ``D``.
    """
    rng = rng_for(seed, n, index)
    kind = ENSEMBLES[(index - 1) % len(ENSEMBLES)]
    A = random_hermitian_from(rng, n)
    scale = 10.0 ** rng.uniform(-2.0, 0.5)
    if kind == "gaussian":
        D = random_hermitian_from(rng, n, scale)
    elif kind == "rank-one":
        v = random_complex(rng, n)
        v /= np.linalg.norm(v)
        D = (scale if rng.uniform() < 0.5 else -scale) * np.outer(v, v.conj())
    else:
        c = rng.normal(size=3) * scale
        D = c[0] * np.eye(n) + c[1] * A + c[2] * (A @ A) / n
    B = as_hermitian(A + as_hermitian(D, atol=1e-9))
    A.setflags(write=False)
    B.setflags(write=False)
    return kind, A, B


def identity_direction_trial(f: ScalarFunction, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal ``A`` with spectrum packed just above the steepest point of ``f``, ``B = A + step*I``.

    The spectrum is spread by less than the step so that the joint spectrum of
    ``A`` and ``B`` stays simple.
    """
    x0 = _steepest_point(f)
    a = x0 + IDENTITY_STEP * np.arange(1, n + 1) / (n + 1)
    A = np.diag(a).astype(np.complex128)
    B = np.diag(a + IDENTITY_STEP).astype(np.complex128)
    return A, B


def trial_matrices(f: ScalarFunction, n: int, seed: int, index: int) -> tuple[str, np.ndarray, np.ndarray]:
    if index == 0:
        A, B = identity_direction_trial(f, n)
        return "identity-direction", A, B
    return lipschitz_trial(n, seed, index)


@lru_cache(maxsize=8192)
def _trial_spectra(n: int, seed: int, index: int):
    _, A, B = lipschitz_trial(n, seed, index)
    return hermitian_eig(A), hermitian_eig(B), singular_values(A - B)


@lru_cache(maxsize=32768)
def _trial_singular_values(f_json: str, n: int, seed: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Singular values of ``A - B`` and ``f(A) - f(B)``; shared across all exponents ``p``."""
    f = ScalarFunction.from_json(f_json)
    if index == 0:
        A, B = identity_direction_trial(f, n)
        return singular_values(A - B), singular_values(apply_function(f, A) - apply_function(f, B))
    dec_a, dec_b, sv_in = _trial_spectra(n, seed, index)
    if f.kind == "identity":
        return sv_in, sv_in
    return sv_in, singular_values(function_of(f, dec_a) - function_of(f, dec_b))


def lipschitz_ratio_experiment(
    f: ScalarFunction, p: float, n: int, trials: int, seed: int, contrast: bool = False
) -> ExperimentReport:
    """Ratios ``||f(A) - f(B)||_p / ||A - B||_p`` over ``trials`` random pairs.

    Trial 0 is a deterministic diagonal pair placed where ``f`` is steepest,
    so a function with a slope-1 region always produces a ratio of 1.
    """
    p = float(p)
    if trials < 1:
        raise ValueError("need at least one trial")
    if not (1.0 < p < math.inf) and not contrast:
        raise ValueError("p must lie in (1, inf); pass contrast=True for the endpoints")
    rows = []
    f_json = f.to_json()
    for index in range(trials + 1):
        kind = "identity-direction" if index == 0 else ENSEMBLES[(index - 1) % len(ENSEMBLES)]
        sv_in, sv_out = _trial_singular_values(f_json, n, seed, index)
        den = lp_norm(sv_in, p)
        if den < SKIP_BELOW:
            rows.append({"trial": index, "ensemble": kind, "norm_in": den, "norm_out": None, "ratio": None})
            continue
        num = lp_norm(sv_out, p)
        rows.append({"trial": index, "ensemble": kind, "norm_in": den, "norm_out": num, "ratio": num / den})
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    worst = max(range(len(rows)), key=lambda i: -1 if rows[i]["ratio"] is None else rows[i]["ratio"])
    params = {"function": f.descriptor, "p": p, "n": n, "trials": trials, "seed": seed, "contrast": contrast}
    summary = {
        "max_ratio": max(ratios) if ratios else None,
        "mean_ratio": float(np.mean(ratios)) if ratios else None,
        "worst_trial": worst,
        "skipped": sum(r["ratio"] is None for r in rows),
        "endpoint": not (1.0 < p < math.inf),
    }
    return ExperimentReport("lipschitz", params, rows, summary)


def joint_spectrum_witness(f: ScalarFunction, A, B) -> tuple[np.ndarray, np.ndarray]:
    """Joint spectrum of ``A`` and ``B`` and a matrix realizing the pair's Lipschitz ratio.

    With ``A = U diag(a) U*`` and ``B = V diag(b) V*`` one has
    ``U*(f(A) - f(B))V = Psi o U*(A - B)V`` where ``Psi`` is the block of the
    divided-difference symbol on the sorted union of ``a`` and ``b`` with rows
    from ``a`` and columns from ``b``. Embedding ``U*(A - B)V`` into that
    block gives a start whose Rayleigh ratio equals the Lipschitz ratio.
    """
    da, db = hermitian_eig(A), hermitian_eig(B)
    n = da.eigenvalues.size
    joint = np.concatenate([da.eigenvalues, db.eigenvalues])
    order = np.argsort(joint, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(2 * n)
    X = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    X[np.ix_(pos[:n], pos[n:])] = da.eigenvectors.conj().T @ (np.asarray(A) - np.asarray(B)) @ db.eigenvectors
    return joint[order], X


# --------------------------------------------------------------------------- divided-difference multipliers


def make_increasing(f: ScalarFunction, epsilon: float = 1e-6) -> ScalarFunction:
    if f.monotone_flag == GENERAL:
        raise ValueError(f"{f.name} is not monotone; split it with split_monotone first")
    if f.monotone_flag == NONDECREASING:
        return strictify(f, epsilon)
    return f


def theorem2_experiment(
    f: ScalarFunction,
    lambdas,
    p: float,
    config: EstimatorConfig | None = None,
    extra_starts=None,
    epsilon: float = 1e-6,
) -> NormEstimate:
    """Norm estimate of the divided-difference multiplier of an increasing 1-Lipschitz ``f``.

    Nondecreasing ``f`` is strictified with ``epsilon`` first.
    """
    g = make_increasing(f, epsilon)
    if g.lipschitz_bound > 1.0 + 1e-12:
        raise ValueError("theorem2_experiment needs a 1-Lipschitz function")
    phi = divided_difference_symbol(g, lambdas)
    return estimate_norm(phi, p, config, extra_starts)


def theorem2_row(f: ScalarFunction, lambdas, p: float, config: EstimatorConfig | None = None) -> dict:
    g = make_increasing(f)
    phi = divided_difference_symbol(g, lambdas)
    est = estimate_norm(phi, p, config)
    witness_ratio = schatten_norm(apply_multiplier(phi, est.witness), p) / schatten_norm(est.witness, p)
    return {
        "function": g.name,
        "p": float(p),
        "n": len(lambdas),
        "estimate_lower_bound": est.value,
        "exact_p2": exact_norm_p2(phi),
        "min_entry": float(np.min(phi.real)),
        "max_entry": float(np.max(phi.real)),
        "witness_ratio": witness_ratio,
        "iterations": est.iterations,
        "converged": est.converged,
    }


# --------------------------------------------------------------------------- oscillatory growth


def lemma_growth_experiment(p: float, n: int, s_grid: Sequence[float], config: EstimatorConfig | None = None) -> FitResult:
    """Estimate ``||M(s)||`` for the symbol ``|k - l|^{is}`` on ``n x n`` and fit ``K (1 + |s|)``."""
    mus = tuple(range(1, n + 1))
    rows = []
    for s in s_grid:
        est = estimate_norm(oscillatory_symbol(OscillatorySpec(mus, s)), p, config)
        rows.append(
            {
                "p": float(p),
                "n": n,
                "s": float(s),
                "estimate_lower_bound": est.value,
                "ratio": est.value / (1.0 + abs(float(s))),
                "iterations": est.iterations,
                "converged": est.converged,
            }
        )
    ratios = [r["ratio"] for r in rows]
    k_hat = max(ratios) if ratios else 0.0
    residuals = [k_hat * (1.0 + abs(r["s"])) - r["estimate_lower_bound"] for r in rows]
    return FitResult(float(p), n, k_hat, k_hat, residuals, rows)


def cp_bound_from_kernel(K: KernelG, growth: FitResult | float) -> float:
    """``K_p^2 * sum_i w_i |g(s_i)| (1 + |s_i|)^2`` with the fitted ``K_p``."""
    k_hat = growth.slope_constant if isinstance(growth, FitResult) else float(growth)
    return k_hat * k_hat * weighted_moment(K)


# --------------------------------------------------------------------------- decomposition


def reconstruct_multiplier(f: ScalarFunction, lambdas, K: KernelG, X) -> np.ndarray:
    """Apply ``sum_i w_i g(s_i) M(s_i, f(lambda)) M(-s_i, lambda)`` to ``X``.

    Each term is the composition of two oscillatory Schur multipliers, so the
    sum is itself a Schur multiplier whose symbol approximates the divided
    differences of ``f``.
    """
    lam = check_gaps(lambdas)
    X = as_matrix(X, square=True)
    n = lam.size
    if X.shape[0] != n:
        raise ValueError("matrix size does not match the number of points")
    if n == 1:
        return np.zeros_like(X)
    fl = f(lam)
    try:
        check_gaps(fl)
    except ValueError as exc:
        raise ValueError("f(lambda) must be strictly ascending (f strictly increasing)") from exc
    off = ~np.eye(n, dtype=bool)
    log_dl = np.log(np.abs(lam[:, None] - lam[None, :])[off])
    log_df = np.log(np.abs(fl[:, None] - fl[None, :])[off])
    if np.max(log_dl - log_df) > K.x_extent:
        raise ValueError("gap ratio outside the kernel range")
    s = K.s_points[:, None]
    terms = np.exp(1j * s * log_df) * np.exp(-1j * s * log_dl)
    symbol = np.zeros((n, n), dtype=np.complex128)
    symbol[off] = (K.weights * K.values) @ terms
    return symbol * X


def reconstruction_case(index: int, seed: int, K: KernelG, n_max: int = 8) -> dict:
    """One seeded decomposition-fidelity case."""
    fs = reconstruction_functions()
    name = sorted(fs)[index % len(fs)]
    f = fs[name]
    n = 2 + index % (n_max - 1)
    rng = rng_for(seed, 7, index)
    while True:
        lam = np.sort(rng.uniform(-3.0, 3.0, n))
        if np.min(np.diff(lam)) > 1e-3:
            break
    X = random_complex(rng, (n, n))
    direct = apply_multiplier(divided_difference_symbol(f, lam), X)
    recon = reconstruct_multiplier(f, lam, K, X)
    denom = np.linalg.norm(direct)
    err = np.linalg.norm(recon - direct) / denom if denom > 0 else np.linalg.norm(recon)
    return {"case": index, "function": name, "n": n, "relative_error": float(err)}


def reconstruction_functions() -> dict[str, ScalarFunction]:
    from schatten_lab.funcalc import positive_part, stock_functions

    out = {"identity": stock_functions()["identity"], "strict-positive-part": strictify(positive_part(), 0.1)}
    for name, f in stock_functions().items():
        if f.monotone_flag == GENERAL:
            g1, g2 = split_monotone(f)
            out[f"{name}+"] = strictify(g1, 0.1)
            out[f"{name}-"] = strictify(g2, 0.1)
    return out


# --------------------------------------------------------------------------- reductions


def parse_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError(f"expected an exact rational (int, Fraction or 'a/b' string), got {x!r}")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"expected an exact rational, got {x!r}")


def integer_reduction_check(mus, s: float, p: float, config: EstimatorConfig | None = None) -> dict:
    """Check ``|mu_k - mu_l|^{is} = N^{-is} |N mu_k - N mu_l|^{is}`` and its norm consequences.

    Also checks that, after shifting to positive integers, the symbol is the
    principal submatrix of ``|k - l|^{is}`` on ``1..max``.
    """
    fr = [parse_rational(m) for m in mus]
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise ValueError("mus must be strictly ascending")
    N = math.lcm(*(m.denominator for m in fr))
    ints = [int(m * N) for m in fr]
    shift = 1 - ints[0]
    pos = [k + shift for k in ints]

    phi_rat = oscillatory_symbol(OscillatorySpec(tuple(float(m) for m in fr), s))
    phi_int = oscillatory_symbol(OscillatorySpec(tuple(float(k) for k in ints), s))
    factor = np.exp(-1j * s * math.log(N))
    entry_err = float(np.max(np.abs(phi_rat - factor * phi_int)))

    full = oscillatory_symbol(OscillatorySpec(tuple(float(k) for k in range(1, pos[-1] + 1)), s))
    sub = restrict_symbol(full, [k - 1 for k in pos])
    sub_err = float(np.max(np.abs(sub - phi_int)))

    e_rat = estimate_norm(phi_rat, p, config).value
    e_int = estimate_norm(phi_int, p, config).value
    rel = abs(e_rat - e_int) / max(e_int, 1e-300)
    return {
        "mus": "|".join(str(m) for m in fr),
        "s": float(s),
        "p": float(p),
        "N": N,
        "max_entry_error": entry_err,
        "submatrix_error": sub_err,
        "estimate_rational": e_rat,
        "estimate_integer": e_int,
        "estimate_rel_diff": rel,
        "passed": entry_err <= 1e-12 and sub_err <= 1e-12 and rel <= 1e-9,
    }


def random_rationals(rng: np.random.Generator, n: int, max_den: int = 6) -> list[Fraction]:
    vals: set[Fraction] = set()
    while len(vals) < n:
        den = int(rng.integers(1, max_den + 1))
        vals.add(Fraction(int(rng.integers(-3 * den, 3 * den + 1)), den))
    return sorted(vals)


def restriction_case(index: int, seed: int, p: float, config: EstimatorConfig | None = None) -> dict:
    """Compare a random symbol's estimate with that of a random principal restriction."""
    rng = rng_for(seed, 11, index)
    n = int(rng.integers(3, 7))
    if index % 2 == 0:
        phi = random_complex(rng, (n, n))
    else:
        mus = tuple(np.sort(rng.choice(np.arange(1, 4 * n), size=n, replace=False)).astype(float))
        phi = oscillatory_symbol(OscillatorySpec(mus, float(rng.uniform(-5, 5))))
    k = int(rng.integers(1, n))
    subset = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    full = estimate_norm(phi, p, config).value
    part = estimate_norm(restrict_symbol(phi, subset), p, config).value
    return {
        "case": index,
        "n": n,
        "subset": "|".join(map(str, subset)),
        "p": float(p),
        "estimate_full": full,
        "estimate_restricted": part,
        "passed": part <= full * 1.02,
    }
