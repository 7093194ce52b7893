"""Scalar Lipschitz functions, matrix functional calculus and divided-difference symbols."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from schatten_lab.linalg import SpectralDecomposition, as_hermitian, hermitian_eig

NONDECREASING = "nondecreasing"
STRICT = "strictly-increasing"
GENERAL = "general"

GAP_RTOL = 1e-10


class DegenerateSpectrumError(ValueError):
    """Raised when eigenvalues are too close for a divided difference to be formed."""


@dataclass(frozen=True)
class ScalarFunction:
    """A real Lipschitz function described by a JSON-serializable descriptor.

    Build instances with :meth:`from_descriptor` (or the helpers below); the
    evaluator, Lipschitz bound and monotonicity flag are derived from the
    descriptor so that every function round-trips through JSON.
    """

    descriptor: dict[str, Any]
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    lipschitz_bound: float
    monotone_flag: str

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    @property
    def kind(self) -> str:
        return self.descriptor["kind"]

    @property
    def name(self) -> str:
        return self.descriptor.get("name") or _default_name(self.descriptor)

    def to_json(self) -> str:
        return json.dumps(self.descriptor, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScalarFunction":
        return cls.from_descriptor(json.loads(text))

    @classmethod
    def from_descriptor(cls, d: dict[str, Any]) -> "ScalarFunction":
        d = dict(d)
        kind = d.get("kind")
        if kind not in _BUILDERS:
            raise ValueError(f"unknown function kind {kind!r}; expected one of {sorted(_BUILDERS)}")
        evaluator, lip, flag = _BUILDERS[kind](d)
        return cls(d, evaluator, float(lip), flag)


def _default_name(d: dict[str, Any]) -> str:
    kind = d["kind"]
    if kind in ("shifted", "strictified", "monotone-part"):
        return f"{kind}({_default_name(d['inner'])})"
    return kind


def _identity(d):
    return (lambda x: x * 1.0), 1.0, STRICT


def _absolute(d):
    return np.abs, 1.0, GENERAL


def _piecewise_linear(d):
    breakpoints = np.asarray(d.get("breakpoints", []), dtype=float)
    slopes = np.asarray(d["slopes"], dtype=float)
    if slopes.size != breakpoints.size + 1:
        raise ValueError("piecewise-linear needs len(slopes) == len(breakpoints) + 1")
    if breakpoints.size and np.any(np.diff(breakpoints) <= 0):
        raise ValueError("breakpoints must be strictly ascending")
    slopes = np.clip(slopes, -1.0, 1.0)
    intercept = float(d.get("intercept", 0.0))
    jumps = np.diff(slopes)

    def f(x):
        # f(0) = intercept, slope slopes[k] between breakpoints k-1 and k.
        x = np.asarray(x, dtype=float)
        hinge = np.maximum(x[..., None] - breakpoints, 0.0) - np.maximum(-breakpoints, 0.0)
        return intercept + slopes[0] * x + hinge @ jumps

    if np.all(slopes > 0):
        flag = STRICT
    elif np.all(slopes >= 0):
        flag = NONDECREASING
    else:
        flag = GENERAL
    return f, float(np.max(np.abs(slopes))), flag


def _scaled_sine(d):
    amp = float(d.get("amplitude", 1.0))
    freq = float(d.get("frequency", 1.0))
    return (lambda x: amp * np.sin(freq * x)), abs(amp * freq), GENERAL


def _shifted(d):
    inner = ScalarFunction.from_descriptor(d["inner"])
    shift = float(d.get("shift", 0.0))
    offset = float(d.get("offset", 0.0))
    return (lambda x: inner(x - shift) + offset), inner.lipschitz_bound, inner.monotone_flag


def _monotone_part(d):
    inner = ScalarFunction.from_descriptor(d["inner"])
    sign = int(d["sign"])
    if sign not in (1, -1):
        raise ValueError("monotone-part sign must be +1 or -1")
    return (lambda x: 0.5 * (x + sign * inner(x))), 1.0, NONDECREASING


def _strictified(d):
    inner = ScalarFunction.from_descriptor(d["inner"])
    eps = float(d["epsilon"])
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    lip = (inner.lipschitz_bound + eps) / (1.0 + eps)
    return (lambda x: (inner(x) + eps * x) / (1.0 + eps)), lip, STRICT


_BUILDERS = {
    "identity": _identity,
    "absolute-value": _absolute,
    "piecewise-linear": _piecewise_linear,
    "scaled-sine": _scaled_sine,
    "shifted": _shifted,
    "monotone-part": _monotone_part,
    "strictified": _strictified,
}


def identity() -> ScalarFunction:
    return ScalarFunction.from_descriptor({"kind": "identity"})


def absolute_value() -> ScalarFunction:
    return ScalarFunction.from_descriptor({"kind": "absolute-value"})


def piecewise_linear(breakpoints, slopes, intercept: float = 0.0) -> ScalarFunction:
    return ScalarFunction.from_descriptor(
        {
            "kind": "piecewise-linear",
            "breakpoints": [float(b) for b in breakpoints],
            "slopes": [float(s) for s in slopes],
            "intercept": float(intercept),
        }
    )


def positive_part() -> ScalarFunction:
    """``max(x, 0)``."""
    return piecewise_linear([0.0], [0.0, 1.0])


def sine(amplitude: float = 1.0, frequency: float = 1.0) -> ScalarFunction:
    return ScalarFunction.from_descriptor(
        {"kind": "scaled-sine", "amplitude": amplitude, "frequency": frequency}
    )


def shifted(f: ScalarFunction, shift: float, offset: float = 0.0) -> ScalarFunction:
    return ScalarFunction.from_descriptor(
        {"kind": "shifted", "inner": f.descriptor, "shift": shift, "offset": offset}
    )


def stock_functions() -> dict[str, ScalarFunction]:
    """The default test set: monotone, non-monotone, smooth and kinked cases."""
    return {
        "identity": identity(),
        "absolute-value": absolute_value(),
        "piecewise-linear": piecewise_linear([-1.0, 0.5, 2.0], [-1.0, 0.25, 1.0, -0.5]),
        "sine": sine(),
    }


_NAMED = {
    "identity": identity,
    "abs": absolute_value,
    "absolute-value": absolute_value,
    "relu": positive_part,
    "positive-part": positive_part,
    "sin": sine,
    "sine": sine,
}


def parse_function(spec: str | dict) -> ScalarFunction:
    """Accept a short name (``abs``, ``relu``, ``sin``, ...), a JSON string or a descriptor dict."""
    if isinstance(spec, dict):
        return ScalarFunction.from_descriptor(spec)
    text = spec.strip()
    if text.startswith("{"):
        return ScalarFunction.from_json(text)
    if text in stock_functions():
        return stock_functions()[text]
    if text in _NAMED:
        return _NAMED[text]()
    raise ValueError(f"unknown function {spec!r}")


def apply_function(f: ScalarFunction, A) -> np.ndarray:
    """``f(A) = U diag(f(lambda)) U*`` through the Jacobi eigendecomposition.

    The identity function returns ``A`` itself; there is nothing to diagonalize.
    """
    if f.kind == "identity":
        return as_hermitian(A)
    return function_of(f, hermitian_eig(A))


def function_of(f: ScalarFunction, dec: SpectralDecomposition) -> np.ndarray:
    U = dec.eigenvectors
    return as_hermitian((U * f(dec.eigenvalues)) @ U.conj().T, atol=np.inf)


def split_monotone(f: ScalarFunction) -> tuple[ScalarFunction, ScalarFunction]:
    """Write a 1-Lipschitz ``f`` as ``g1 - g2`` with ``g1 = (x + f)/2`` and ``g2 = (x - f)/2``."""
    if f.lipschitz_bound > 1.0 + 1e-12:
        raise ValueError(
            f"split_monotone needs a 1-Lipschitz function, got bound {f.lipschitz_bound}; rescale first"
        )
    g1 = ScalarFunction.from_descriptor({"kind": "monotone-part", "sign": 1, "inner": f.descriptor})
    g2 = ScalarFunction.from_descriptor({"kind": "monotone-part", "sign": -1, "inner": f.descriptor})
    return g1, g2


def strictify(f: ScalarFunction, epsilon: float) -> ScalarFunction:
    """``x -> (f(x) + eps*x)/(1 + eps)``, strictly increasing when ``f`` is nondecreasing."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if f.monotone_flag == GENERAL:
        raise ValueError("strictify expects a nondecreasing function")
    return ScalarFunction.from_descriptor({"kind": "strictified", "epsilon": float(epsilon), "inner": f.descriptor})


def check_gaps(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise ValueError("expected a non-empty 1-d sequence")
    if not np.all(np.isfinite(lam)):
        raise ValueError("non-finite eigenvalue")
    if lam.size > 1:
        tol = GAP_RTOL * max(1.0, abs(lam[0]), abs(lam[-1]))
        gaps = np.diff(lam)
        if np.min(gaps) <= tol:
            k = int(np.argmin(gaps))
            raise DegenerateSpectrumError(
                f"spectrum not strictly ascending beyond tolerance {tol:.3g}: gap {gaps[k]:.3g} at index {k}"
            )
    return lam


def divided_difference_symbol(f: ScalarFunction, lambdas) -> np.ndarray:
    """``phi[k, l] = (f(l_k) - f(l_l)) / (l_k - l_l)`` off the diagonal, zero on it."""
    lam = check_gaps(lambdas)
    fl = f(lam)
    num = fl[:, None] - fl[None, :]
    den = lam[:, None] - lam[None, :]
    np.fill_diagonal(den, 1.0)
    phi = num / den
    # Rounding can push a quotient a few ulps past the bounds the function guarantees.
    lip = f.lipschitz_bound
    phi = np.clip(phi, 0.0 if f.monotone_flag != GENERAL else -lip, lip)
    np.fill_diagonal(phi, 0.0)
    return phi.astype(np.complex128)
