"""Concrete plants: the scalar-input double integrator and the truck
connected-cruise-control (CCC) model with its headway barrier."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .core import Barrier, LinearClassK, SystemModel


@dataclass(frozen=True)
class Plant:
    """A system bundled with its barrier, nominal controller and defaults."""

    system: SystemModel
    barrier: Barrier
    nominal: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha: LinearClassK = field(default_factory=LinearClassK)
    input_bounds: tuple[np.ndarray, np.ndarray] | None = None
    state_names: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Double integrator: x1' = -x2, x2' = u (+ d), h = x1 - x2
# ---------------------------------------------------------------------------


def di_h(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] - x[..., 1]


def di_grad(x) -> np.ndarray:
    return np.broadcast_to(np.array([1.0, -1.0]), np.shape(x)).copy()


def di_nominal(x, e=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x[..., 0] - 2.0 * x[..., 1] - 1.0)[..., None]


def _di_f(x, e):
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 1], np.zeros_like(x[..., 1])], axis=-1)


_DI_G = np.array([[0.0], [1.0]])


def _di_g(x):
    return np.broadcast_to(_DI_G, np.shape(x) + (1,))


def double_integrator() -> Plant:
    system = SystemModel(n=2, m=1, p=0, f=_di_f, g=_di_g, name="double_integrator")
    return Plant(
        system=system,
        barrier=Barrier(di_h, di_grad),
        nominal=di_nominal,
        alpha=LinearClassK(1.0),
        state_names=("x1", "x2"),
    )


def di_state_on_level(level: float, x2: float) -> np.ndarray:
    """A state with ``h(x) = level`` and the given second coordinate."""
    return np.array([level + x2, x2])


def di_equilibrium() -> np.ndarray:
    """Closed-loop equilibrium of the nominal loop, found by root solving."""
    from scipy.optimize import fsolve

    def residual(x):
        return _di_f(x, None) + _di_g(x) @ di_nominal(x)

    return fsolve(residual, np.zeros(2), xtol=1e-14)


# ---------------------------------------------------------------------------
# Truck CCC: x = (D, v, v_L), e = (a_L,)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruckParams:
    D_sf: float = 2.0  # m
    theta: float = 1.1  # s
    eta: float = 0.6  # s
    xi: float = 0.03  # s^2/m
    zeta: float = -0.03  # s^2/m
    omega: float = -0.03  # s^2/m
    k1: float = 0.7  # 1/s
    k2: float = 0.75  # 1/s
    kappa: float = 0.7  # 1/s
    D_st: float = 7.0  # m
    v_max: float = 20.0  # m/s
    a_brake: float = 6.0  # |lower input bound|, m/s^2
    a_throttle: float = 2.0  # m/s^2
    aL_brake: float = 10.0  # m/s^2
    aL_throttle: float = 3.0  # m/s^2

    @property
    def input_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([-self.a_brake]), np.array([self.a_throttle])

    @property
    def lead_accel_range(self) -> tuple[float, float]:
        return -self.aL_brake, self.aL_throttle


def safe_distance(v, vL, p: TruckParams = TruckParams()):
    return p.D_sf + p.theta * v + p.eta * vL + p.xi * v * v + p.zeta * v * vL + p.omega * vL * vL


def safe_distance_dv(v, vL, p: TruckParams = TruckParams()):
    return p.theta + 2.0 * p.xi * v + p.zeta * vL


def safe_distance_dvL(v, vL, p: TruckParams = TruckParams()):
    return p.eta + p.zeta * v + 2.0 * p.omega * vL


def range_policy(D, p: TruckParams = TruckParams()):
    """Desired speed for headway ``D``: zero below ``D_st``, linear, then ``v_max``."""
    return np.clip(p.kappa * (np.asarray(D, dtype=float) - p.D_st), 0.0, p.v_max)


def truck_nominal(x, p: TruckParams = TruckParams()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    D, v, vL = x[..., 0], x[..., 1], x[..., 2]
    return (p.k1 * (range_policy(D, p) - v) + p.k2 * (vL - v))[..., None]


def truck_h(x, p: TruckParams = TruckParams()):
    x = np.asarray(x, dtype=float)
    return x[..., 0] - safe_distance(x[..., 1], x[..., 2], p)


def truck_grad(x, p: TruckParams = TruckParams()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v, vL = x[..., 1], x[..., 2]
    return np.stack([np.ones_like(v), -safe_distance_dv(v, vL, p), -safe_distance_dvL(v, vL, p)], axis=-1)


def truck_barrier(x, p: TruckParams = TruckParams()):
    """``(h, grad h)`` with ``h = D - h_hat(v, v_L)``."""
    h = truck_h(x, p)
    return (float(h) if np.ndim(h) == 0 else h), truck_grad(x, p)


def truck_ccc(p: TruckParams = TruckParams()) -> Plant:
    G = np.array([[0.0], [1.0], [0.0]])

    def f(x, e):
        x = np.asarray(x, dtype=float)
        aL = np.broadcast_to(np.asarray(e, dtype=float)[..., 0], x.shape[:-1])
        return np.stack([x[..., 2] - x[..., 1], np.zeros_like(x[..., 1]), aL], axis=-1)

    def g(x):
        return np.broadcast_to(G, np.shape(x) + (1,))

    system = SystemModel(
        n=3,
        m=1,
        p=1,
        f=f,
        g=g,
        state_lower=np.array([-np.inf, 0.0, 0.0]),
        name="truck_ccc",
    )
    barrier = Barrier(partial(truck_h, p=p), partial(truck_grad, p=p))
    return Plant(
        system=system,
        barrier=barrier,
        nominal=partial(_truck_nominal_ex, p=p),
        alpha=LinearClassK(1.0),
        input_bounds=p.input_bounds,
        state_names=("D", "v", "v_L"),
    )


def _truck_nominal_ex(x, e=None, p: TruckParams = TruckParams()):
    return truck_nominal(x, p)


def truck_issf_controller(x, eps0: float, p: TruckParams = TruckParams()) -> np.ndarray:
    """Nominal command plus the constant-gain robustifying term (unsaturated)."""
    from .filters import IssfAdditive

    plant = truck_ccc(p)
    return IssfAdditive(plant.nominal, eps0).apply(plant.system, plant.barrier, x, np.zeros(1))


def truck_tissf_controller(x, schedule, p: TruckParams = TruckParams()) -> np.ndarray:
    """Nominal command plus the ``1/eps(h)`` robustifying term (unsaturated).

    The added term is ``L_g h / eps(h) = -(d h_hat / d v) / eps(h)``, i.e. it
    always brakes on the operating box.
    """
    from .filters import TissfAdditive

    plant = truck_ccc(p)
    return TissfAdditive(plant.nominal, schedule).apply(plant.system, plant.barrier, x, np.zeros(1))


def truck_steady_headway(v: float, p: TruckParams = TruckParams()) -> float:
    """Headway at which the nominal loop cruises at ``v = v_L`` (range-policy inverse)."""
    return p.D_st + v / p.kappa
