"""Dense complex linear algebra: Jacobi eigensolver, singular values, Schatten norms.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Hermitian inputs
are symmetrized on construction so that downstream code can rely on exact
Hermitian symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-13
HERMITIAN_ATOL = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def as_matrix(X, *, square: bool = False) -> np.ndarray:
    """Validate ``X`` as a finite 2-d complex matrix and return a complex copy."""
    M = np.array(X, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def as_hermitian(A, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Check Hermitian symmetry up to ``atol`` and return the exact symmetrization."""
    M = as_matrix(A, square=True)
    dev = np.max(np.abs(M - M.conj().T))
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    H = 0.5 * (M + M.conj().T)
    H[np.diag_indices_from(H)] = H.diagonal().real
    return H


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Tournament schedule on an even number of players: m-1 rounds of m/2 disjoint pairs.
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        top, bottom = players[:half], players[half:][::-1]
        p = np.array([min(a, b) for a, b in zip(top, bottom)])
        q = np.array([max(a, b) for a, b in zip(top, bottom)])
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def hermitian_eig(A) -> SpectralDecomposition:
    """Cyclic complex Jacobi eigensolver for Hermitian matrices.

    Sweeps visit all off-diagonal pairs in round-robin order, so each round
    applies n/2 disjoint plane rotations at once. Iteration stops when the
    off-diagonal Frobenius mass drops below ``1e-13 * ||A||_F``.

    Raises
    ------
    ConvergenceError
        If the sweep cap is reached first.
    """
    H = as_hermitian(A)
    n = H.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(H)
    if n == 1 or scale == 0.0:
        return _sorted(H.diagonal().real.copy(), V, 0)

    m = n + (n % 2)
    if m != n:
        # A dummy row/column keeps the round-robin schedule uniform; it stays decoupled.
        Hp = np.zeros((m, m), dtype=np.complex128)
        Hp[:n, :n] = H
        Vp = np.eye(m, dtype=np.complex128)
    else:
        Hp, Vp = H, V
    rounds = _round_robin(m)
    offmask = ~np.eye(m, dtype=bool)
    threshold = JACOBI_TOL * scale

    for sweep in range(1, JACOBI_MAX_SWEEPS + 1):
        for p, q in rounds:
            apq = Hp[p, q]
            mag = np.abs(apq)
            active = mag > 1e-300
            if not np.any(active):
                continue
            p, q, apq, mag = p[active], q[active], apq[active], mag[active]
            app, aqq = Hp[p, p].real, Hp[q, q].real
            phase = apq / mag
            tau = (aqq - app) / (2.0 * mag)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            # 2x2 unitary block [[g11, g12], [g21, g22]] diagonalizing [[app, apq], [conj(apq), aqq]].
            g11, g12 = phase * c, phase * s
            g21, g22 = -s, c

            cp, cq = Hp[:, p].copy(), Hp[:, q].copy()
            Hp[:, p] = cp * g11 + cq * g21
            Hp[:, q] = cp * g12 + cq * g22
            rp, rq = Hp[p, :].copy(), Hp[q, :].copy()
            Hp[p, :] = np.conj(g11)[:, None] * rp + np.conj(g21)[:, None] * rq
            Hp[q, :] = np.conj(g12)[:, None] * rp + np.conj(g22)[:, None] * rq
            Hp[p, q] = 0.0
            Hp[q, p] = 0.0
            Hp[p, p] = Hp[p, p].real
            Hp[q, q] = Hp[q, q].real

            vp, vq = Vp[:, p].copy(), Vp[:, q].copy()
            Vp[:, p] = vp * g11 + vq * g21
            Vp[:, q] = vp * g12 + vq * g22

        off = math.sqrt(float(np.sum(np.abs(Hp[offmask]) ** 2)))
        if off < threshold:
            return _sorted(Hp.diagonal().real[:n].copy(), Vp[:n, :n].copy(), sweep)

    raise ConvergenceError(
        f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal mass {off:.3g})"
    )


def _sorted(w: np.ndarray, V: np.ndarray, sweeps: int) -> SpectralDecomposition:
    order = np.argsort(w, kind="stable")
    return SpectralDecomposition(w[order], V[:, order], sweeps)


def singular_values(X) -> np.ndarray:
    """Singular values in descending order.

    Exactly Hermitian input uses ``|eigenvalues|``; anything else goes through
    the Hermitian dilation ``[[0, X], [X*, 0]]``, whose eigenvalues are
    ``+-sigma_i``. Neither route squares ``X``, so small singular values keep
    full absolute accuracy.
    """
    M = as_matrix(X)
    r, c = M.shape
    if r == c and np.array_equal(M, M.conj().T):
        return np.sort(np.abs(hermitian_eig(M).eigenvalues))[::-1]
    dil = np.zeros((r + c, r + c), dtype=np.complex128)
    dil[:r, r:] = M
    dil[r:, :r] = M.conj().T
    w = hermitian_eig(dil).eigenvalues[::-1][: min(r, c)]
    return np.clip(w, 0.0, None)


def gram_singular_values(X) -> np.ndarray:
    """Square roots of the eigenvalues of the smaller Gram matrix (negatives clamped to 0)."""
    M = as_matrix(X)
    G = M.conj().T @ M if M.shape[0] >= M.shape[1] else M @ M.conj().T
    w = hermitian_eig(0.5 * (G + G.conj().T)).eigenvalues
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def lp_norm(sigma: np.ndarray, p: float) -> float:
    """ell^p norm of a non-negative vector, scaled to avoid overflow."""
    sigma = np.asarray(sigma, dtype=float)
    top = float(np.max(sigma)) if sigma.size else 0.0
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    return top * float(np.sum((sigma / top) ** p)) ** (1.0 / p)


def schatten_norm(X, p: float) -> float:
    """Schatten p-norm ``(sum sigma_i^p)^(1/p)``; ``p = inf`` gives the operator norm."""
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"Schatten exponent must satisfy p >= 1, got {p}")
    return lp_norm(singular_values(X), p)


def random_hermitian(n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """``(G + G*)/2`` with i.i.d. complex Gaussian ``G`` of standard deviation ``scale``.

    The stream is PCG64 seeded through ``numpy.random.SeedSequence(seed)``, so a
    given ``(n, seed, scale)`` always yields the same matrix.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    return random_hermitian_from(rng, n, scale)


def random_hermitian_from(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    G = random_complex(rng, (n, n), scale)
    return as_hermitian(0.5 * (G + G.conj().T))


def random_complex(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    # Real and imaginary parts carry half the variance each, so E|z|^2 = scale^2.
    sd = scale / math.sqrt(2.0)
    return rng.normal(0.0, sd, shape) + 1j * rng.normal(0.0, sd, shape)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Eigenvector matrix of a random Hermitian matrix."""
    return hermitian_eig(random_hermitian_from(rng, n)).eigenvectors
