"""Safety filters wrapping a nominal controller ``k(x, e)``.

Two families are provided: additive robustification ``u = k + L_g h^T / eps``
and the single-constraint QP, which is solved in closed form as a projection
onto a half-space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Barrier,
    ConstantEpsilon,
    EpsilonSchedule,
    LinearClassK,
    NonFiniteError,
    SystemModel,
    lie_derivatives,
)

Nominal = Callable[[np.ndarray, np.ndarray], np.ndarray]


class InfeasibleFilterError(RuntimeError):
    """The barrier constraint cannot be met by any input at this state."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = None if x is None else np.array(x, dtype=float)


def _nominal(k: Nominal, x, e, m: int) -> np.ndarray:
    u = np.asarray(k(x, e), dtype=float)
    expected = np.shape(x)[:-1] + (m,)
    if u.shape != expected:
        raise ValueError(f"nominal input has shape {u.shape}, expected {expected}")
    if not np.isfinite(u).all():
        raise NonFiniteError(f"nominal input non-finite at x={x}")
    return u


def _as_input(u, m: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    if u.shape[-1] != m:
        raise ValueError(f"u has trailing length {u.shape[-1]}, expected {m}")
    return u


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def cbf_condition_slack(system: SystemModel, barrier: Barrier, alpha, x, e, u):
    """``L_f h + L_g h u + alpha(h)``; nonnegative iff ``u`` is in K_CBF(x)."""
    lf, lg = lie_derivatives(system, barrier, x, e)
    u = _as_input(u, system.m)
    out = lf + np.sum(lg * u, axis=-1) + alpha(barrier.value(x))
    if not np.isfinite(out).all():
        raise NonFiniteError(f"CBF slack non-finite at x={x}")
    return _scalar(out)


def tissf_condition_slack(system, barrier, alpha, schedule, x, e, u):
    """``L_f h + L_g h u + alpha(h) - |L_g h|^2 / eps(h)``."""
    lf, lg = lie_derivatives(system, barrier, x, e)
    u = _as_input(u, system.m)
    h = barrier.value(x)
    out = lf + np.sum(lg * u, axis=-1) + alpha(h) - np.sum(lg * lg, axis=-1) / schedule(h)
    return _scalar(out)


def project_halfspace(k: np.ndarray, a: np.ndarray, c) -> np.ndarray:
    """Closest point to ``k`` in ``{u : a . u >= c}`` (batched over leading axes).

    Raises InfeasibleFilterError when ``a = 0`` and ``c > a . k = 0``.
    """
    aa = np.sum(a * a, axis=-1)
    ak = np.sum(a * k, axis=-1)
    active = ak < c
    bad = active & (aa == 0.0)
    if np.any(bad):
        gap = float(np.max(np.where(bad, c - ak, -np.inf)))
        raise InfeasibleFilterError(f"L_g h = 0 and drift condition violated by {gap:.6g}")
    step = np.where(active, (c - ak) / np.where(aa == 0.0, 1.0, aa), 0.0)
    return k + a * step[..., None]


# ---------------------------------------------------------------------------
# Filter variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NominalFilter:
    nominal: Nominal

    label = "nominal"
    schedule = None

    def apply(self, system, barrier, x, e) -> np.ndarray:
        return _nominal(self.nominal, x, e, system.m)


@dataclass(frozen=True)
class IssfAdditive:
    nominal: Nominal
    eps0: float

    label = "issf"

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError(f"eps0 must be positive, got {self.eps0}")

    @property
    def schedule(self) -> ConstantEpsilon:
        return ConstantEpsilon(self.eps0)

    def apply(self, system, barrier, x, e) -> np.ndarray:
        k = _nominal(self.nominal, x, e, system.m)
        _, lg = lie_derivatives(system, barrier, x, e)
        return k + lg / self.eps0


@dataclass(frozen=True)
class TissfAdditive:
    nominal: Nominal
    schedule: EpsilonSchedule

    label = "tissf"

    def apply(self, system, barrier, x, e) -> np.ndarray:
        k = _nominal(self.nominal, x, e, system.m)
        _, lg = lie_derivatives(system, barrier, x, e)
        return k + lg / np.asarray(self.schedule(barrier.value(x)))[..., None]


@dataclass(frozen=True)
class TissfQP:
    """``argmin |u - k|^2 / 2`` s.t. ``L_f h + L_g h u >= -alpha(h) + |L_g h|^2/eps(h) + margin``."""

    nominal: Nominal
    schedule: EpsilonSchedule
    alpha: LinearClassK = LinearClassK(1.0)
    margin: float = 0.0

    label = "tissf_qp"

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    def rhs(self, h, lg: np.ndarray):
        return -self.alpha(h) + np.sum(lg * lg, axis=-1) / self.schedule(h) + self.margin

    def apply(self, system, barrier, x, e) -> np.ndarray:
        k = _nominal(self.nominal, x, e, system.m)
        lf, lg = lie_derivatives(system, barrier, x, e)
        h = barrier.value(x)
        try:
            return project_halfspace(k, lg, self.rhs(h, lg) - lf)
        except InfeasibleFilterError as exc:
            raise InfeasibleFilterError(f"{exc} at x={np.asarray(x)}", x) from None


@dataclass(frozen=True)
class CbfQP:
    """The undisturbed CBF-QP: the TISSf-QP with the robustness term dropped."""

    nominal: Nominal
    alpha: LinearClassK = LinearClassK(1.0)
    margin: float = 0.0

    label = "cbf_qp"
    schedule = None

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    def rhs(self, h, lg: np.ndarray):
        return -self.alpha(h) + self.margin + 0.0 * lg[..., 0]

    def apply(self, system, barrier, x, e) -> np.ndarray:
        k = _nominal(self.nominal, x, e, system.m)
        lf, lg = lie_derivatives(system, barrier, x, e)
        h = barrier.value(x)
        try:
            return project_halfspace(k, lg, self.rhs(h, lg) - lf)
        except InfeasibleFilterError as exc:
            raise InfeasibleFilterError(f"{exc} at x={np.asarray(x)}", x) from None


FilterSpec = NominalFilter | IssfAdditive | TissfAdditive | TissfQP | CbfQP


def issf_additive(spec: IssfAdditive, system, barrier) -> Callable:
    return lambda x, e=(): spec.apply(system, barrier, x, e)


def tissf_additive(spec: TissfAdditive, system, barrier) -> Callable:
    return lambda x, e=(): spec.apply(system, barrier, x, e)


def tissf_qp(spec: TissfQP, system, barrier) -> Callable:
    return lambda x, e=(): spec.apply(system, barrier, x, e)


def cbf_qp(spec: CbfQP, system, barrier) -> Callable:
    return lambda x, e=(): spec.apply(system, barrier, x, e)


def saturate(u, lower, upper) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    clipped = np.clip(u, lower, upper)
    return clipped, bool(np.any(clipped != u))
