import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_norm, multiplier_ratio, oscillatory_entries
from schatten_lab.funcalc import divided_difference_symbol, identity, positive_part, strictify
from schatten_lab.linalg import random_complex, schatten_norm
from schatten_lab.schur import (
    EstimatorConfig,
    OscillatorySpec,
    apply_multiplier,
    estimate_norm,
    exact_norm_p2,
    oscillatory_symbol,
    restrict_symbol,
    triangular_parts,
)

# Brute-force maxima (10^6 samples + BFGS polish, see oracles.brute_force_norm) of the
# off-diagonal mask on 3x3, frozen so the fast tests need not rerun the search.
MASK3 = {1.5: 1.0257760021727618, 4.0: 1.0641658617058178}

seeds = st.integers(min_value=0, max_value=2**32 - 1)
exponents = st.sampled_from([1.1, 1.5, 2.0, 3.0, 4.0, 8.0])
FAST = EstimatorConfig(starts=6, max_iters=200)


def rng(seed):
    return np.random.default_rng(seed)


def mask(n):
    return 1.0 - np.eye(n)


# ----------------------------------------------------------------- apply_multiplier


def test_ones_multiplier_is_identity():
    X = random_complex(rng(0), (4, 4))
    assert np.array_equal(apply_multiplier(np.ones((4, 4)), X), X)


def test_mask_zeroes_diagonal():
    X = random_complex(rng(1), (4, 4))
    Y = apply_multiplier(mask(4), X)
    assert np.array_equal(np.diag(Y), np.zeros(4))
    assert np.array_equal(Y - np.diag(np.diag(Y)), X - np.diag(np.diag(X)))


def test_identity_symbol_kills_identity_matrix():
    phi = divided_difference_symbol(identity(), [0.0, 1.0, 2.5])
    assert np.array_equal(apply_multiplier(phi, np.eye(3)), np.zeros((3, 3)))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_multiplier(np.ones((3, 3)), np.ones((2, 2)))


# ----------------------------------------------------------------- oscillatory_symbol


@given(n=st.integers(1, 8), start=st.floats(-10, 10))
def test_oscillatory_s_zero_is_mask(n, start):
    mus = tuple(start + np.arange(n) * 1.5)
    assert np.array_equal(oscillatory_symbol(OscillatorySpec(mus, 0.0)), mask(n))


def test_oscillatory_sign_flip():
    phi = oscillatory_symbol(OscillatorySpec((1.0, 3.0), math.pi / math.log(2)))
    assert abs(phi[0, 1] - (-1.0)) <= 1e-14


def test_oscillatory_scalar_oracle():
    mus = (1.0, 2.0, 4.0)
    assert np.allclose(oscillatory_symbol(OscillatorySpec(mus, 1.0)), oscillatory_entries(mus, 1.0), atol=1e-15)


@given(n=st.integers(2, 8), s=st.floats(-50, 50), seed=seeds)
def test_oscillatory_unimodular(n, s, seed):
    mus = tuple(np.sort(rng(seed).choice(100, size=n, replace=False)).astype(float))
    phi = oscillatory_symbol(OscillatorySpec(mus, s))
    off = ~np.eye(n, dtype=bool)
    assert np.allclose(np.abs(phi[off]), 1.0, atol=1e-14)
    assert np.all(np.diag(phi) == 0)
    assert np.array_equal(phi, phi.T)
    assert np.allclose(phi[off], oscillatory_entries(mus, s)[off], atol=1e-12)


@pytest.mark.parametrize("mus", [(1.0, 1.0), (2.0, 1.0), (0.0, float("nan"))])
def test_oscillatory_spec_rejects(mus):
    with pytest.raises(ValueError):
        OscillatorySpec(mus, 1.0)


# ----------------------------------------------------------------- restrict_symbol


def test_restrict_full_set():
    phi = random_complex(rng(2), (5, 5))
    assert np.array_equal(restrict_symbol(phi, range(5)), phi)


def test_restrict_singleton():
    phi = oscillatory_symbol(OscillatorySpec((1.0, 2.0, 3.0), 2.0))
    assert np.array_equal(restrict_symbol(phi, [1]), np.zeros((1, 1)))


def test_restrict_matches_rebuilt_symbol():
    full = oscillatory_symbol(OscillatorySpec((1.0, 2.0, 3.0, 5.0), 1.7))
    assert np.array_equal(restrict_symbol(full, [0, 1, 3]), oscillatory_symbol(OscillatorySpec((1.0, 2.0, 5.0), 1.7)))


def test_restrict_errors():
    phi = np.ones((3, 3))
    with pytest.raises(IndexError):
        restrict_symbol(phi, [0, 3])
    with pytest.raises(ValueError):
        restrict_symbol(phi, [2, 1])


# ----------------------------------------------------------------- exact_norm_p2 / estimate_norm basics


def test_exact_p2_values():
    assert exact_norm_p2(np.ones((3, 3))) == 1.0
    phi = divided_difference_symbol(strictify(positive_part(), 1e-3), [-2.0, -1.0, 1.0, 3.0])
    assert exact_norm_p2(phi) <= 1.0


def test_exact_p2_matches_estimate_seed_11():
    phi = random_complex(rng(11), (5, 5))
    assert math.isclose(estimate_norm(phi, 2.0).value, exact_norm_p2(phi), rel_tol=1e-6)


@pytest.mark.parametrize("p", [1.1, 1.5, 3.0, 8.0])
def test_ones_symbol_any_p(p):
    assert abs(estimate_norm(np.ones((4, 4)), p).value - 1.0) <= 1e-9


@pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
def test_rejects_bad_p(p):
    with pytest.raises(ValueError):
        estimate_norm(np.ones((2, 2)), p)


def test_rejects_non_finite_symbol():
    with pytest.raises(ValueError):
        estimate_norm([[1.0, np.nan], [0.0, 1.0]], 2.0)


def test_zero_symbol():
    est = estimate_norm(np.zeros((3, 3)), 1.5)
    assert est.value == 0.0


def test_estimator_config_json():
    cfg = EstimatorConfig.from_dict({"starts": 4, "max_iters": 10, "tol": 1e-6, "seed": 3})
    assert EstimatorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        EstimatorConfig.from_dict({"restarts": 2})


def test_deterministic_for_fixed_seed():
    phi = random_complex(rng(4), (5, 5))
    a, b = estimate_norm(phi, 3.0), estimate_norm(phi, 3.0)
    assert a.value == b.value and np.array_equal(a.witness, b.witness)


def test_extra_start_can_only_help():
    phi = oscillatory_symbol(OscillatorySpec(tuple(range(1, 7)), 4.0))
    X = random_complex(rng(5), (6, 6))
    base = estimate_norm(phi, 1.5, FAST).value
    est = estimate_norm(phi, 1.5, FAST, extra_starts=[X])
    assert est.value >= base - 1e-12
    assert est.value >= float(multiplier_ratio(phi, X, 1.5)) * (1 - 1e-12)


# ----------------------------------------------------------------- oracle agreement


@pytest.mark.parametrize("p", sorted(MASK3))
def test_mask3_matches_frozen_oracle(p):
    assert math.isclose(estimate_norm(mask(3), p).value, MASK3[p], rel_tol=1e-6)


def test_mask2_p4_matches_brute_force():
    ref = brute_force_norm(mask(2), 4.0, samples=10**5)
    assert math.isclose(estimate_norm(mask(2), 4.0).value, ref, rel_tol=1e-2)


def test_mask_duality_at_n3():
    # The mask is symmetric, so p and its conjugate exponent give the same norm.
    assert math.isclose(MASK3[4.0], estimate_norm(mask(3), 4.0 / 3.0).value, rel_tol=1e-6)


# ----------------------------------------------------------------- properties


@given(n=st.integers(1, 6), seed=seeds, p=exponents)
def test_witness_reproduces_value(n, seed, p):
    phi = random_complex(rng(seed), (n, n))
    est = estimate_norm(phi, p, FAST)
    assert math.isclose(schatten_norm(est.witness, p), 1.0, rel_tol=1e-9)
    ratio = schatten_norm(apply_multiplier(phi, est.witness), p) / schatten_norm(est.witness, p)
    assert math.isclose(ratio, est.value, rel_tol=1e-9)
    assert est.value <= np.sum(np.abs(phi)) + 1e-9


@given(n=st.integers(1, 7), seed=seeds)
def test_p2_exactness(n, seed):
    phi = random_complex(rng(seed), (n, n))
    assert math.isclose(estimate_norm(phi, 2.0, FAST).value, exact_norm_p2(phi), rel_tol=1e-6)


@given(n=st.integers(2, 6), seed=seeds, p=exponents, theta=st.floats(-math.pi, math.pi))
def test_unimodular_scalar_invariance(n, seed, p, theta):
    phi = random_complex(rng(seed), (n, n))
    a = estimate_norm(phi, p, FAST).value
    b = estimate_norm(cmath.exp(1j * theta) * phi, p, FAST).value
    assert math.isclose(a, b, rel_tol=1e-9)


@given(n=st.integers(2, 6), seed=seeds, p=st.sampled_from([1.25, 1.5, 3.0, 4.0]))
def test_duality_consistency(n, seed, p):
    phi = random_complex(rng(seed), (n, n))
    q = p / (p - 1)
    a, b = estimate_norm(phi, p).value, estimate_norm(phi.T, q).value
    assert abs(a - b) <= 0.05 * max(a, b)


@given(n=st.integers(2, 6), seed=seeds, p=exponents, data=st.data())
def test_restriction_monotone(n, seed, p, data):
    phi = random_complex(rng(seed), (n, n))
    subset = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)))
    full = estimate_norm(phi, p).value
    assert estimate_norm(restrict_symbol(phi, subset), p).value <= full * 1.02


@given(n=st.integers(2, 6), seed=seeds, p=exponents)
def test_triangular_split(n, seed, p):
    phi = random_complex(rng(seed), (n, n))
    lower, upper = triangular_parts(phi)
    assert np.array_equal(lower + upper + np.diag(np.diag(phi)), phi)
    whole = estimate_norm(phi - np.diag(np.diag(phi)), p).value
    assert whole <= (estimate_norm(lower, p).value + estimate_norm(upper, p).value) * 1.02


@given(n=st.integers(2, 5), s=st.floats(-20, 20), p=exponents)
def test_oscillatory_estimate_bounds(n, s, p):
    # Lower bound: a unimodular entry; upper bound: the triangle inequality over off-diagonals.
    est = estimate_norm(oscillatory_symbol(OscillatorySpec(tuple(range(1, n + 1)), s)), p, FAST).value
    assert 1.0 - 1e-9 <= est <= 1.0 + (n - 1)
