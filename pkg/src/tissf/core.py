"""Domain types shared by every other module.

Conventions: states are 1-D float arrays of shape (n,), inputs (m,), the
exogenous measured channel ``e`` is (p,) and may be empty.  Gradients are
returned as 1-D arrays and treated as row vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


class DisturbanceBoundError(RuntimeError):
    """A disturbance sample exceeded its declared envelope."""


def as_vector(values, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally checking its length."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries: {arr}")
    return arr


# ---------------------------------------------------------------------------
# Systems and barriers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemModel:
    """Control-affine plant ``xdot = f(x, e) + g(x) u``.

    ``f`` and ``g`` must broadcast over leading batch axes: ``f`` maps
    ``(..., n), (..., p)`` to ``(..., n)`` and ``g`` maps ``(..., n)`` to
    ``(..., n, m)``.  ``state_lower`` optionally clamps states from below
    after each integration step (e.g. speeds that cannot go negative).
    """

    n: int
    m: int
    p: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    state_lower: np.ndarray | None = None
    name: str = "system"

    def drift(self, x, e) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.f(x, e), dtype=float)
        if out.shape != x.shape:
            raise DimensionError(f"f returned shape {out.shape}, expected {x.shape}")
        if not np.isfinite(out).all():
            raise NonFiniteError(f"f(x, e) is non-finite at x={x}, e={e}")
        return out

    def input_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.g(x), dtype=float)
        if out.shape != x.shape + (self.m,):
            raise DimensionError(f"g returned shape {out.shape}, expected {x.shape + (self.m,)}")
        if not np.isfinite(out).all():
            raise NonFiniteError(f"g(x) is non-finite at x={x}")
        return out

    def rhs(self, x, e, u) -> np.ndarray:
        """Unchecked ``f(x, e) + g(x) u`` for the integrator's inner loop."""
        return self.f(x, e) + np.einsum("...nm,...m->...n", self.g(x), u)


@dataclass(frozen=True)
class Barrier:
    """``h`` maps ``(..., n)`` to ``(...)``; ``grad`` maps ``(..., n)`` to ``(..., n)``."""

    h: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]

    def value(self, x):
        v = np.asarray(self.h(np.asarray(x, dtype=float)), dtype=float)
        if not np.isfinite(v).all():
            raise NonFiniteError(f"h(x) is non-finite at x={x}")
        return float(v) if v.ndim == 0 else v

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gr = np.asarray(self.grad(x), dtype=float)
        if gr.shape != x.shape:
            raise DimensionError(f"grad h has shape {gr.shape}, expected {x.shape}")
        if not np.isfinite(gr).all():
            raise NonFiniteError(f"grad h is non-finite at x={x}")
        return gr


def check_point(system: SystemModel, x, e):
    """Validate a (possibly batched) state and exogenous input."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (system.n,):
        raise DimensionError(f"x has shape {x.shape}, expected trailing length {system.n}")
    if not np.isfinite(x).all():
        raise NonFiniteError(f"x contains non-finite entries: {x}")
    if system.p == 0:
        return x, np.zeros(x.shape[:-1] + (0,))
    e = np.asarray(e, dtype=float)
    if e.shape[-1:] != (system.p,):
        raise DimensionError(f"e has shape {e.shape}, expected trailing length {system.p}")
    if not np.isfinite(e).all():
        raise NonFiniteError(f"e contains non-finite entries: {e}")
    return x, e


def lie_derivatives(system: SystemModel, barrier: Barrier, x, e=()) -> tuple[float, np.ndarray]:
    """Return ``(L_f h, L_g h)`` at ``(x, e)``; ``L_g h`` has shape (..., m)."""
    x, e = check_point(system, x, e)
    grad = barrier.gradient(x)
    lf = np.sum(grad * system.drift(x, e), axis=-1)
    lg = np.einsum("...n,...nm->...m", grad, system.input_matrix(x))
    return (float(lf) if lf.ndim == 0 else lf), lg


# ---------------------------------------------------------------------------
# Class-K functions and epsilon schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearClassK:
    """Extended class-K-infinity function ``alpha(r) = c r``."""

    c: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"class-K gain must be positive, got {self.c}")

    def __call__(self, r):
        return self.c * r

    def inv(self, r):
        return r / self.c

    def inv_deriv(self, r):
        return 0.0 * np.asarray(r, dtype=float) + 1.0 / self.c


@dataclass(frozen=True)
class ConstantEpsilon:
    eps0: float

    def __post_init__(self):
        if not (np.isfinite(self.eps0) and self.eps0 > 0):
            raise ValueError(f"eps0 must be positive, got {self.eps0}")

    def __call__(self, h):
        return 0.0 * np.asarray(h, dtype=float) + self.eps0

    def deriv(self, h):
        return 0.0 * np.asarray(h, dtype=float)


@dataclass(frozen=True)
class ExponentialEpsilon:
    """``eps(h) = eps0 * exp(lambda1 * h + lambda0)``."""

    eps0: float
    lambda1: float
    lambda0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps0) and self.eps0 > 0):
            raise ValueError(f"eps0 must be positive, got {self.eps0}")
        if not (np.isfinite(self.lambda1) and self.lambda1 >= 0):
            raise ValueError(f"lambda1 must be non-negative, got {self.lambda1}")
        if not np.isfinite(self.lambda0):
            raise ValueError("lambda0 must be finite")

    def __call__(self, h):
        return self.eps0 * np.exp(self.lambda1 * h + self.lambda0)

    def deriv(self, h):
        return self.lambda1 * self(h)


EpsilonSchedule = ConstantEpsilon | ExponentialEpsilon


def epsilon_eval(schedule: EpsilonSchedule, h: float) -> tuple[float, float]:
    return float(schedule(h)), float(schedule.deriv(h))


# ---------------------------------------------------------------------------
# Disturbances
# ---------------------------------------------------------------------------
# Every signal is called as ``d(t, x)`` and returns an (m,) array; ``bound``
# is the declared sup-norm envelope that the theory's ||d||_inf stands for.


@dataclass(frozen=True)
class ZeroDisturbance:
    dim: int = 1

    @property
    def bound(self) -> float:
        return 0.0

    def __call__(self, t, x=None) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    omega: float = 1.0
    phase: float = 0.0
    declared_bound: float | None = None

    @property
    def bound(self) -> float:
        return abs(self.amplitude) if self.declared_bound is None else self.declared_bound

    def __call__(self, t, x=None) -> np.ndarray:
        return np.array([self.amplitude * np.sin(self.omega * t + self.phase)])


@dataclass(frozen=True)
class ConstantBias:
    value: float
    declared_bound: float | None = None

    @property
    def bound(self) -> float:
        return abs(self.value) if self.declared_bound is None else self.declared_bound

    def __call__(self, t, x=None) -> np.ndarray:
        return np.array([self.value])


@dataclass(frozen=True)
class SampledSeries:
    """Piecewise-linear table lookup; holds the end values outside the table."""

    times: np.ndarray
    values: np.ndarray
    declared_bound: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape or t.size < 1:
            raise DimensionError("times and values must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def bound(self) -> float:
        if self.declared_bound is None:
            return float(np.max(np.abs(self.values)))
        return self.declared_bound

    def __call__(self, t, x=None) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.values)])


@dataclass(frozen=True)
class StateDrag:
    """Resistance ``d = -(c0 + c1 v^2)`` on state coordinate ``index``.

    The envelope cannot be derived from time alone, so ``declared_bound``
    is mandatory (typically ``c0 + c1 * v_max**2``).
    """

    c0: float
    c1: float
    declared_bound: float
    index: int = 1

    @property
    def bound(self) -> float:
        return self.declared_bound

    def __call__(self, t, x=None) -> np.ndarray:
        if x is None:
            raise ValueError("StateDrag needs the current state")
        v = np.asarray(x)[..., self.index]
        return (-(self.c0 + self.c1 * v * v))[..., None]


@dataclass(frozen=True)
class SumDisturbance:
    parts: tuple = field(default_factory=tuple)
    declared_bound: float | None = None

    @property
    def bound(self) -> float:
        if self.declared_bound is None:
            return float(sum(p.bound for p in self.parts))
        return self.declared_bound

    def __call__(self, t, x=None) -> np.ndarray:
        out = self.parts[0](t, x)
        for part in self.parts[1:]:
            out = out + part(t, x)
        return out


def check_disturbance(sample: np.ndarray, bound: float, t: float, rtol: float = 1e-12) -> None:
    sq = float(np.max(np.sum(sample * sample, axis=-1)))
    limit = bound * (1 + rtol) + rtol
    if sq > limit * limit:
        raise DisturbanceBoundError(f"|d({t:g})| = {sq ** 0.5:.6g} exceeds declared bound {bound:.6g}")


def central_difference_gradient(fun: Callable[[np.ndarray], float], x: Sequence[float], step: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient, used as an independent check on analytic ones."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        hi = max(step, step * abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += hi
        xm[i] -= hi
        out[i] = (fun(xp) - fun(xm)) / (2 * hi)
    return out
