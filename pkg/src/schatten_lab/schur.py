"""Schur multipliers: entrywise action, oscillatory symbols and S^p -> S^p norm estimation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from schatten_lab.linalg import as_matrix, random_complex, schatten_norm

SIGMA_FLOOR = 1e-300


@dataclass(frozen=True)
class EstimatorConfig:
    starts: int = 16
    max_iters: int = 500
    tol: float = 1e-8
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "EstimatorConfig":
        if not d:
            return cls()
        unknown = set(d) - {"starts", "max_iters", "tol", "seed"}
        if unknown:
            raise ValueError(f"unknown estimator settings: {sorted(unknown)}")
        return cls(
            starts=int(d.get("starts", cls.starts)),
            max_iters=int(d.get("max_iters", cls.max_iters)),
            tol=float(d.get("tol", cls.tol)),
            seed=int(d.get("seed", cls.seed)),
        )


@dataclass(frozen=True)
class NormEstimate:
    """Lower bound on ``||M_phi||_{S^p -> S^p}`` certified by ``witness``.

    ``value`` is the Rayleigh ratio of the unit-norm ``witness``; the true
    multiplier norm can only be larger.
    """

    value: float
    witness: np.ndarray
    p: float
    iterations: int
    starts: int
    converged: bool
    best_start: int = 0


@dataclass(frozen=True)
class OscillatorySpec:
    mus: tuple[float, ...]
    s: float

    def __post_init__(self):
        mus = tuple(float(m) for m in self.mus)
        if len(mus) < 1:
            raise ValueError("need at least one point")
        if not all(math.isfinite(m) for m in mus) or not math.isfinite(float(self.s)):
            raise ValueError("mus and s must be finite")
        if any(b <= a for a, b in zip(mus, mus[1:])):
            raise ValueError("mus must be strictly ascending")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "s", float(self.s))


def as_symbol(phi) -> np.ndarray:
    return as_matrix(phi, square=True)


def apply_multiplier(phi, X) -> np.ndarray:
    """Entrywise product ``(phi[k, l] * X[k, l])``."""
    phi = np.asarray(phi)
    X = np.asarray(X)
    if phi.shape != X.shape[-2:]:
        raise ValueError(f"symbol shape {phi.shape} does not match matrix shape {X.shape}")
    return phi * X


def oscillatory_symbol(spec: OscillatorySpec) -> np.ndarray:
    """``|mu_k - mu_l|^{is}`` off the diagonal, with ``0^{is} = 0`` on it."""
    mu = np.asarray(spec.mus)
    gap = np.abs(mu[:, None] - mu[None, :])
    np.fill_diagonal(gap, 1.0)
    phi = np.exp(1j * spec.s * np.log(gap))
    np.fill_diagonal(phi, 0.0)
    return phi


def restrict_symbol(phi, indices: Sequence[int]) -> np.ndarray:
    """Principal submatrix of ``phi`` on the (0-based, ascending) ``indices``."""
    phi = as_symbol(phi)
    idx = np.asarray(indices, dtype=int)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("indices must be a non-empty 1-d sequence")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly ascending")
    if idx[0] < 0 or idx[-1] >= phi.shape[0]:
        raise IndexError(f"index out of range for a {phi.shape[0]}x{phi.shape[0]} symbol")
    return phi[np.ix_(idx, idx)].copy()


def exact_norm_p2(phi) -> float:
    """Norm on S^2 (entrywise Euclidean), i.e. ``max |phi[k, l]|``."""
    return float(np.max(np.abs(as_symbol(phi))))


def _batched_norm(sigma: np.ndarray, p: float) -> np.ndarray:
    top = np.max(sigma, axis=-1)
    safe = np.where(top > 0, top, 1.0)
    return np.where(top > 0, safe * np.sum((sigma / safe[..., None]) ** p, axis=-1) ** (1.0 / p), 0.0)


def _dual_element(Y: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit S^q element ``Z`` with ``Tr(Z Y) = ||Y||_p`` (bilinear trace pairing).

    For ``Y = U S V*`` this is ``V S^{p-1} U*`` normalized in S^q.
    """
    U, sigma, Vh = np.linalg.svd(Y)
    norm_p = _batched_norm(sigma, p)
    powered = np.maximum(sigma, SIGMA_FLOOR) ** (p - 1.0)
    q = p / (p - 1.0)
    norm_q = _batched_norm(powered, q)
    Z = np.conj(np.swapaxes(Vh, -1, -2)) * powered[..., None, :] @ np.conj(np.swapaxes(U, -1, -2))
    Z = Z / np.where(norm_q > 0, norm_q, 1.0)[..., None, None]
    return Z, norm_p


def _starts(phi: np.ndarray, cfg: EstimatorConfig, extra) -> np.ndarray:
    n = phi.shape[0]
    mats = [np.ones((n, n), dtype=np.complex128)]
    k, l = np.unravel_index(int(np.argmax(np.abs(phi))), phi.shape)
    elem = np.zeros((n, n), dtype=np.complex128)
    elem[k, l] = 1.0
    mats.append(elem)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n_random = max(cfg.starts - len(mats), 0)
    if n_random:
        mats.extend(random_complex(rng, (n_random, n, n)))
    mats = mats[: max(cfg.starts, 0)] if cfg.starts < 2 else mats
    for X in extra or ():
        X = as_matrix(X, square=True)
        if X.shape != phi.shape:
            raise ValueError("extra start has the wrong shape")
        mats.append(X)
    if not mats:
        raise ValueError("estimator needs at least one start")
    return np.stack(mats)


def estimate_norm(phi, p: float, config: EstimatorConfig | None = None, extra_starts=None) -> NormEstimate:
    """Multi-start duality iteration for the S^p -> S^p norm of ``M_phi``.

    Each start alternates between the norming element of ``M_phi X`` in S^q
    and the norming element of ``M_{phi^T}`` applied to it back in S^p. Under
    the pairing ``<A, B> = Tr(AB)`` the adjoint of ``M_phi`` is ``M_{phi^T}``,
    and every half-step can only increase the ratio, so the best ratio over
    all starts is a certified lower bound. All starts advance together as a
    batch; a start leaves the batch once its relative improvement falls
    below ``tol``.

    Parameters
    ----------
    phi : (n, n) array_like
        Symbol.
    p : float
        Exponent, ``1 < p < inf``.
    config : EstimatorConfig, optional
        Start count, iteration cap, tolerance and seed.
    extra_starts : sequence of (n, n) arrays, optional
        Additional deterministic starting matrices, appended after the standard ones.
    """
    cfg = config or EstimatorConfig()
    p = float(p)
    if not (1.0 < p < math.inf):
        raise ValueError(f"estimate_norm needs 1 < p < inf, got {p}")
    phi = as_symbol(phi)
    phi_t = phi.T.copy()

    X0 = _starts(phi, cfg, extra_starts)
    n_starts = X0.shape[0]
    _, sigma0, _ = np.linalg.svd(X0)
    norms0 = _batched_norm(sigma0, p)
    alive = norms0 > 0
    X = np.where(alive[:, None, None], X0 / np.where(alive, norms0, 1.0)[:, None, None], X0)

    best_ratio = np.zeros(n_starts)
    best_X = X.copy()
    done = ~alive
    iters = np.zeros(n_starts, dtype=int)
    prev = np.full(n_starts, -np.inf)

    for it in range(cfg.max_iters):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        Xa = X[active]
        Y = phi * Xa
        Z, ratio = _dual_element(Y, p)
        iters[active] = it + 1

        improved = ratio > best_ratio[active]
        best_ratio[active[improved]] = ratio[improved]
        best_X[active[improved]] = Xa[improved]

        stalled = (ratio - prev[active]) <= cfg.tol * np.maximum(ratio, 1e-300)
        zero = ratio == 0.0
        done[active[stalled | zero]] = True
        prev[active] = ratio

        W = phi_t * Z
        Xn, wnorm = _dual_element(W, p / (p - 1.0))
        ok = wnorm > 0
        done[active[~ok]] = True
        X[active[ok]] = Xn[ok]

    converged = bool(np.all(done))
    # Ties go to the lowest start index for determinism.
    winner = int(np.argmax(best_ratio))
    witness = best_X[winner]
    wn = schatten_norm(witness, p)
    if wn > 0:
        witness = witness / wn
        value = schatten_norm(phi * witness, p)
    else:
        value = 0.0
    return NormEstimate(
        value=float(value),
        witness=witness,
        p=p,
        iterations=int(iters.max()) if iters.size else 0,
        starts=n_starts,
        converged=converged,
        best_start=winner,
    )


def triangular_parts(phi) -> tuple[np.ndarray, np.ndarray]:
    """Strictly lower (``k > l``) and strictly upper (``k < l``) parts of ``phi``."""
    phi = as_symbol(phi)
    return np.tril(phi, -1), np.triu(phi, 1)
