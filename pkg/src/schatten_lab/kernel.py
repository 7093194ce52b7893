"""A concrete kernel ``g`` with ``lambda/mu = int g(s) lambda^{is} mu^{-is} ds`` for ``0 < lambda < mu``.

Writing ``x = log(mu/lambda) > 0`` the identity reads ``exp(-x) = int g(s) e^{-isx} ds``,
so ``g`` is the inverse Fourier transform of any smooth, rapidly decaying
profile ``h`` that agrees with ``exp(-x)`` on ``x >= 0``. We take
``h(x) = exp(-x) * smooth_step(x)``, which vanishes for ``x <= -1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import czt

DEFAULT_BUILD = {"x_extent": 40.0, "x_step": 1e-3, "s_extent": 250.0, "s_step": 0.05}
RESIDUAL_THRESHOLD = 1e-6


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(x):
    """C-infinity step: 0 for ``x <= -1``, 1 for ``x >= 0``, nondecreasing in between."""
    x = np.asarray(x, dtype=float)
    a, b = _bump(x + 1.0), _bump(-x)
    with np.errstate(invalid="ignore"):
        mid = a / (a + b)
    out = np.where(x >= 0, 1.0, np.where(x <= -1, 0.0, mid))
    return out if out.ndim else float(out)


def profile_h(x):
    """``exp(-x) * smooth_step(x)``."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-x) * smooth_step(x)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class KernelG:
    """Sampled kernel: points ``s_i``, values ``g(s_i)`` and trapezoid weights ``w_i``."""

    s_points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    build_params: dict = field(default_factory=dict)

    @property
    def x_extent(self) -> float:
        return float(self.build_params["x_extent"])

    def conjugate_symmetry_error(self) -> float:
        return float(np.max(np.abs(self.values - np.conj(self.values[::-1]))))

    def tail_ratio(self) -> float:
        g = np.abs(self.values)
        return float(max(g[0], g[-1]) / np.max(g))

    def integrate(self, phases: np.ndarray) -> np.ndarray:
        """``sum_i w_i g(s_i) exp(-i s_i x)`` for each ``x`` in ``phases``."""
        x = np.asarray(phases, dtype=float)
        wg = self.weights * self.values
        flat = x.ravel()
        out = np.empty(flat.size, dtype=np.complex128)
        chunk = max(1, 2_000_000 // max(self.s_points.size, 1))
        for start in range(0, flat.size, chunk):
            sl = flat[start : start + chunk]
            out[start : start + chunk] = np.exp(-1j * np.outer(sl, self.s_points)) @ wg
        return out.reshape(x.shape)


def _simpson_weights(n_intervals: int, step: float) -> np.ndarray:
    w = np.full(n_intervals + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (step / 3.0)


def _trapezoid_weights(n_points: int, step: float) -> np.ndarray:
    w = np.full(n_points, step)
    w[0] = w[-1] = 0.5 * step
    return w


def x_grid(x_extent: float, x_step: float) -> tuple[np.ndarray, float]:
    n_int = int(round((x_extent + 1.0) / x_step))
    n_int += n_int % 2
    step = (x_extent + 1.0) / n_int
    return np.linspace(-1.0, x_extent, n_int + 1), step


def s_grid(s_extent: float, s_step: float) -> np.ndarray:
    half = int(round(s_extent / s_step))
    return np.arange(-half, half + 1) * s_step


def fourier_samples(x: np.ndarray, coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``sum_k coeffs_k exp(i s_j x_k)`` for uniform grids ``x`` and ``s`` (chirp z-transform)."""
    dx = x[1] - x[0]
    ds = s[1] - s[0]
    a = np.exp(-1j * s[0] * dx)
    w = np.exp(1j * ds * dx)
    return np.exp(1j * s * x[0]) * czt(coeffs.astype(np.complex128), m=s.size, w=w, a=a)


def build_kernel(
    x_extent: float = DEFAULT_BUILD["x_extent"],
    x_step: float = DEFAULT_BUILD["x_step"],
    s_extent: float = DEFAULT_BUILD["s_extent"],
    s_step: float = DEFAULT_BUILD["s_step"],
) -> KernelG:
    """Sample ``g(s) = (1/2pi) int h(x) e^{isx} dx`` (composite Simpson in ``x``).

    The returned weights are trapezoid weights on the symmetric ``s`` grid.
    Too coarse a grid is not rejected here; check it with
    :func:`representation_residuals`.
    """
    if not (x_extent > 0 and x_step > 0 and s_extent > 0 and s_step > 0):
        raise ValueError("grid parameters must be positive")
    if math.exp(-x_extent) >= 1e-14:
        raise ValueError(f"x_extent={x_extent} too small: need exp(-x_extent) < 1e-14")
    if s_step >= s_extent:
        raise ValueError("s_step must be smaller than s_extent")
    x, dx = x_grid(x_extent, x_step)
    coeffs = profile_h(x) * _simpson_weights(x.size - 1, dx) / (2.0 * math.pi)
    s = s_grid(s_extent, s_step)
    g = fourier_samples(x, coeffs, s)
    # h is real, so g(-s) = conj(g(s)); impose it exactly on the symmetric grid.
    g = 0.5 * (g + np.conj(g[::-1]))
    params = {
        "profile": "exp(-x)*smooth_step(x), cutoff width 1",
        "x_extent": float(x_extent),
        "x_step": float(dx),
        "x_rule": "simpson",
        "s_extent": float(s[-1]),
        "s_step": float(s_step),
        "s_rule": "trapezoid",
    }
    return KernelG(s, g, _trapezoid_weights(s.size, s_step), params)


def kernel_moment(K: KernelG, m: int) -> float:
    """``sum_i w_i |s_i|^m |g(s_i)|``."""
    if m < 0 or m > 8:
        raise ValueError("moment order must be in 0..8")
    return float(np.sum(K.weights * np.abs(K.s_points) ** m * np.abs(K.values)))


def weighted_moment(K: KernelG) -> float:
    """``sum_i w_i |g(s_i)| (1 + |s_i|)^2``, the kernel factor of the C_p bound."""
    return float(np.sum(K.weights * np.abs(K.values) * (1.0 + np.abs(K.s_points)) ** 2))


def evaluate_representation(K: KernelG, lam: float, mu: float) -> complex:
    """``sum_i w_i g(s_i) lam^{i s_i} mu^{-i s_i}``, which approximates ``lam/mu``."""
    lam, mu = float(lam), float(mu)
    if not (0 < lam < mu):
        raise ValueError(f"need 0 < lambda < mu, got ({lam}, {mu})")
    x = math.log(mu / lam)
    if x > K.x_extent:
        raise ValueError(f"log(mu/lambda)={x:.3g} exceeds the kernel range {K.x_extent}")
    return complex(K.integrate(np.array([x]))[0])


def standard_ratios(count: int = 50) -> np.ndarray:
    return np.logspace(-2.0, math.log10(1.0 - 1e-3), count)


def representation_residuals(K: KernelG, ratios=None) -> list[dict]:
    """Residual table ``|int g(s) r^{is} ds - r|`` over ratios ``r = lambda/mu``."""
    r = standard_ratios() if ratios is None else np.asarray(ratios, dtype=float)
    vals = K.integrate(-np.log(r))
    return [
        {
            "ratio": float(ri),
            "re": float(v.real),
            "im": float(v.imag),
            "abs_error": float(abs(v - ri)),
        }
        for ri, v in zip(r, vals)
    ]


def write_kernel_csv(K: KernelG, fh) -> None:
    fh.write("# " + json.dumps(K.build_params, sort_keys=True) + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", "re_g", "im_g", "weight"])
    for s, g, wt in zip(K.s_points, K.values, K.weights):
        w.writerow([repr(float(s)), repr(float(g.real)), repr(float(g.imag)), repr(float(wt))])


def read_kernel_csv(fh) -> KernelG:
    text = fh.read() if hasattr(fh, "read") else str(fh)
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("kernel CSV must start with a '# {build params}' header line")
    params = json.loads(lines[0][1:].strip())
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    s = np.array([float(r["s"]) for r in rows])
    g = np.array([complex(float(r["re_g"]), float(r["im_g"])) for r in rows])
    w = np.array([float(r["weight"]) for r in rows])
    return KernelG(s, g, w, params)
