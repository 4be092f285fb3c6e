"""Time-dependent scalar coefficients.

Coefficients of the evolution family and the gauge parameter gamma(t) are
either plain floats (constant) or a :class:`ScalarPath`. A path can wrap
callables for the value and its time derivative, or a sampled table; when
no derivative is available the path falls back to central finite
differences of the samples (second-order accurate in the sample spacing).
"""

from __future__ import annotations

import numpy as np

__all__ = ["ScalarPath", "as_path", "coef_value", "coef_add", "coef_scale"]

Coefficient = "float | Callable[[float], float] | ScalarPath"


class ScalarPath:
    """A scalar function of time with a derivative."""

    def __init__(
        self,
        value: "float | Callable[[float], float]",
        dot: "float | Callable[[float], float] | None" = None,
        samples: "tuple[np.ndarray, np.ndarray] | None" = None,
    ):
        if samples is not None:
            ts, vs = np.asarray(samples[0], float), np.asarray(samples[1], float)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
                raise ValueError("samples must be two equal-length 1d arrays")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("sample times must increase strictly")
            self._value = lambda t: float(np.interp(t, ts, vs))
            if dot is None:
                dv = np.gradient(vs, ts)  # central differences inside, one-sided at ends
                self._dot = lambda t: float(np.interp(t, ts, dv))
            else:
                self._dot = dot if callable(dot) else (lambda t, c=float(dot): c)
            return
        self._value = value if callable(value) else (lambda t, c=float(value): c)
        if dot is None:
            dot = 0.0 if not callable(value) else None
        if dot is None:
            h = 1e-6
            self._dot = lambda t: (self._value(t + h) - self._value(t - h)) / (2 * h)
        else:
            self._dot = dot if callable(dot) else (lambda t, c=float(dot): c)

    def value(self, t: float) -> float:
        return float(self._value(t))

    def dot(self, t: float) -> float:
        return float(self._dot(t))

    def __call__(self, t: float) -> float:
        return self.value(t)

    def scaled(self, factor: float) -> "ScalarPath":
        return ScalarPath(
            lambda t: factor * self.value(t), lambda t: factor * self.dot(t)
        )

    def __add__(self, other: "ScalarPath") -> "ScalarPath":
        other = as_path(other)
        return ScalarPath(
            lambda t: self.value(t) + other.value(t),
            lambda t: self.dot(t) + other.dot(t),
        )

    def __neg__(self) -> "ScalarPath":
        return self.scaled(-1.0)


def as_path(value) -> ScalarPath:
    """Coerce a float, callable or path into a :class:`ScalarPath`."""
    if isinstance(value, ScalarPath):
        return value
    return ScalarPath(value)


def coef_value(coef, t: float) -> float:
    """Evaluate a coefficient (float, callable or path) at time ``t``."""
    if isinstance(coef, ScalarPath):
        return coef.value(t)
    if callable(coef):
        return float(coef(t))
    return float(coef)


def is_constant(coef) -> bool:
    return not (callable(coef) or isinstance(coef, ScalarPath))


def coef_add(a, b):
    """Sum of two coefficients, staying a float when both are floats."""
    if is_constant(a) and is_constant(b):
        return float(a) + float(b)
    return lambda t: coef_value(a, t) + coef_value(b, t)


def coef_scale(a, factor: float):
    if is_constant(a):
        return float(a) * factor
    return lambda t: coef_value(a, t) * factor
