"""Fixed-step closed-loop simulation, lead-vehicle profiles and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .cert import gamma_tissf
from .core import LinearClassK, check_disturbance
from .filters import InfeasibleFilterError

DIVERGENCE_LIMIT = 1e6


class SimulationAborted(RuntimeError):
    """Integration stopped early; ``trajectory`` holds the rows computed so far."""

    def __init__(self, message, trajectory=None, cause=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause


@dataclass
class Trajectory:
    dt: float
    t: np.ndarray
    x: np.ndarray
    u_nominal: np.ndarray
    u_applied: np.ndarray
    d: np.ndarray
    e: np.ndarray
    h: np.ndarray
    gamma_T: np.ndarray
    h_dT: np.ndarray
    saturated: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    @property
    def intervention(self) -> np.ndarray:
        """Pointwise ``|u_applied - u_nominal|``."""
        return np.linalg.norm(self.u_applied - self.u_nominal, axis=1)

    def to_csv(self, path) -> None:
        n, m, p = self.x.shape[1], self.u_applied.shape[1], self.e.shape[1]
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u_nom{i + 1}" for i in range(m)]
            + [f"u_app{i + 1}" for i in range(m)]
            + [f"d{i + 1}" for i in range(m)]
            + [f"e{i + 1}" for i in range(p)]
            + ["h", "gamma_T", "h_dT", "saturated"]
        )
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(len(self)):
                vals = np.concatenate(
                    [
                        [self.t[k]],
                        self.x[k],
                        self.u_nominal[k],
                        self.u_applied[k],
                        self.d[k],
                        self.e[k],
                        [self.h[k], self.gamma_T[k], self.h_dT[k]],
                    ]
                )
                fh.write(",".join(f"{v:.17g}" for v in vals) + f",{int(self.saturated[k])}\n")


def read_trajectory_csv(path, n: int, m: int, p: int, dt: float | None = None) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = iter(range(data.shape[1]))

    def take(k):
        idx = [next(cols) for _ in range(k)]
        return data[:, idx]

    t = take(1)[:, 0]
    x, un, ua, d, e = take(n), take(m), take(m), take(m), take(p)
    h, gT, hdT, sat = take(4).T
    step = dt if dt is not None else float(t[1] - t[0])
    return Trajectory(step, t, x, un, ua, d, e, h, gT, hdT, sat.astype(bool))


# ---------------------------------------------------------------------------
# Lead-vehicle profiles
# ---------------------------------------------------------------------------


class LeadProfileError(ValueError):
    pass


@dataclass
class LeadProfile:
    t: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)

    def __len__(self):
        return self.t.shape[0]

    def accel(self, t: float) -> float:
        return float(np.interp(t, self.t, self.a))

    def speed(self, t: float) -> float:
        return float(np.interp(t, self.t, self.v))

    def validate(self, a_range=(-10.0, 3.0), rel_tol: float = 0.02) -> None:
        """Check ordering, signs, the acceleration envelope and v/a consistency."""
        if self.t.ndim != 1 or self.v.shape != self.t.shape or self.a.shape != self.t.shape:
            raise LeadProfileError("t, v_L, a_L must be equal-length 1-D arrays")
        if len(self) < 1:
            raise LeadProfileError("empty lead profile")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.a))):
            raise LeadProfileError("lead profile contains non-finite values")
        if np.any(np.diff(self.t) <= 0):
            k = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise LeadProfileError(f"row {k}: time not strictly increasing")
        bad = np.flatnonzero(self.v < 0)
        if bad.size:
            raise LeadProfileError(f"row {bad[0]}: negative lead speed v_L={self.v[bad[0]]}")
        lo, hi = a_range
        bad = np.flatnonzero((self.a < lo - 1e-12) | (self.a > hi + 1e-12))
        if bad.size:
            raise LeadProfileError(f"row {bad[0]}: lead acceleration a_L={self.a[bad[0]]} outside [{lo}, {hi}]")
        if len(self) > 1:
            integrated = self.v[0] + np.concatenate([[0.0], np.cumsum(0.5 * (self.a[1:] + self.a[:-1]) * np.diff(self.t))])
            err = np.abs(integrated - self.v)
            scale = max(float(np.max(np.abs(self.v))), 1.0)
            if np.max(err) > rel_tol * scale:
                k = int(np.argmax(err))
                raise LeadProfileError(
                    f"row {k}: v_L={self.v[k]:.6g} inconsistent with integrated a_L ({integrated[k]:.6g})"
                )

    def resample(self, dt: float, t_end: float | None = None) -> "LeadProfile":
        t_end = self.t[-1] if t_end is None else t_end
        count = int(round((t_end - self.t[0]) / dt)) + 1
        t = self.t[0] + dt * np.arange(count)
        return LeadProfile(t, np.interp(t, self.t, self.v), np.interp(t, self.t, self.a))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,v_L,a_L\n")
            for row in zip(self.t, self.v, self.a):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def synth_emergency_brake(
    v0: float = 15.0,
    a_min: float = -8.0,
    t_start: float = 1.0,
    jerk: float | None = None,
    dt: float = 1e-3,
    t_end: float | None = None,
) -> LeadProfile:
    """Synthetic lead braking from ``v0`` to a full stop.

    Without a jerk limit the deceleration is a rectangular pulse of depth
    ``a_min``.  With one it is trapezoidal; when ``v0`` is too small to reach
    ``a_min`` under the jerk limit the pulse becomes triangular.
    """
    if v0 < 0:
        raise ValueError("v0 must be non-negative")
    if a_min >= 0:
        raise ValueError("a_min must be negative")
    if jerk is not None and jerk <= 0:
        raise ValueError("jerk limit must be positive")
    # (t0, t1, a(t0+), a(t1-)) with a linear in between and zero elsewhere
    if v0 == 0:
        segments = []
        stop = t_start
    elif jerk is None:
        stop = t_start + v0 / -a_min
        segments = [(t_start, stop, a_min, a_min)]
    else:
        depth = -a_min
        ramp = depth / jerk
        if v0 >= depth * ramp:
            hold = (v0 - depth * ramp) / depth
        else:
            depth = math.sqrt(v0 * jerk)
            ramp = depth / jerk
            hold = 0.0
        t1, t2 = t_start + ramp, t_start + ramp + hold
        stop = t2 + ramp
        segments = [(t_start, t1, 0.0, -depth), (t1, t2, -depth, -depth), (t2, stop, -depth, 0.0)]
    t_end = stop + 5.0 if t_end is None else t_end
    t = dt * np.arange(int(round(t_end / dt)) + 1)
    a = np.zeros_like(t)
    v = np.full_like(t, float(v0))
    for t0, t1, a0, a1 in segments:
        if t1 <= t0:
            continue
        slope = (a1 - a0) / (t1 - t0)
        inside = (t >= t0) & (t < t1)
        a[inside] = a0 + slope * (t[inside] - t0)
        tau = np.clip(t - t0, 0.0, t1 - t0)
        v += a0 * tau + 0.5 * slope * tau**2
    v = np.maximum(v, 0.0)
    v[t >= stop] = 0.0
    return LeadProfile(t, v, a)


def ingest_lead_csv(path, dt: float | None = None, validate: bool = True) -> LeadProfile:
    """Read a ``t,v_L,a_L`` file; ``#`` lines are comments."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "v_L", "a_L"]:
            raise LeadProfileError(f"{path}: expected header 't,v_L,a_L', got {header}")
        for k, row in enumerate(reader):
            if len(row) != 3:
                raise LeadProfileError(f"{path}: row {k}: expected 3 columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise LeadProfileError(f"{path}: row {k}: non-numeric entry {row}") from None
    if not rows:
        raise LeadProfileError(f"{path}: no data rows")
    arr = np.array(rows)
    profile = LeadProfile(arr[:, 0], arr[:, 1], arr[:, 2])
    if validate:
        profile.validate()
    if dt is not None:
        profile = profile.resample(dt)
    return profile


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def integrate(
    system,
    barrier,
    controller,
    disturbance,
    x0,
    dt: float = 1e-3,
    T: float = 20.0,
    lead: LeadProfile | None = None,
    input_bounds=None,
    alpha=None,
    schedule=None,
    d_inf: float | None = None,
    check_bound: bool = True,
    hold: bool = True,
) -> Trajectory:
    """Simulate ``xdot = f(x, e) + g(x) (u + d(t))`` with classical RK4.

    The applied input is held over each step (zero-order hold); ``d`` and the
    exogenous channel ``e`` are sampled at the RK4 stage times.  The
    ``gamma_T``/``h_dT`` columns are filled when ``schedule`` is given
    (``alpha`` defaults to the identity, ``d_inf`` to the disturbance bound).

    ``hold=False`` re-evaluates the filter at every stage instead, which
    makes the scheme fourth order on the continuous closed loop (the hold
    limits it to first order).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise ValueError(f"x0 must have shape ({system.n},), got {x0.shape}")
    try:
        return integrate_batch(
            system, barrier, controller, disturbance, x0[None, :], dt, T, lead,
            input_bounds, alpha, schedule, d_inf, check_bound, hold,
        )[0]
    except SimulationAborted as exc:
        exc.trajectory = exc.trajectory[0] if exc.trajectory else None
        raise


def integrate_batch(
    system,
    barrier,
    controller,
    disturbance,
    x0s,
    dt: float = 1e-3,
    T: float = 20.0,
    lead: LeadProfile | None = None,
    input_bounds=None,
    alpha=None,
    schedule=None,
    d_inf: float | None = None,
    check_bound: bool = True,
    hold: bool = True,
) -> list[Trajectory]:
    """Integrate several initial conditions in lock step.

    Every member sees the same disturbance signal and lead profile; results
    are identical to separate :func:`integrate` calls.
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    x = np.array(x0s, dtype=float)
    if x.ndim != 2 or x.shape[1] != system.n:
        raise ValueError(f"initial states must have shape (B, {system.n}), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("initial states must be finite")
    B = x.shape[0]
    steps = int(round(T / dt))
    count = steps + 1
    n, m, p = system.n, system.m, system.p
    d_inf = disturbance.bound if d_inf is None else d_inf
    if schedule is not None and alpha is None:
        alpha = LinearClassK(1.0)
    lower = system.state_lower
    bound = disturbance.bound
    no_exo = np.zeros((B, p))

    def exo(t):
        if p == 0 or lead is None:
            return no_exo
        return np.full((B, p), lead.accel(t))

    def dist(t, xs):
        sample = np.broadcast_to(np.asarray(disturbance(t, xs), dtype=float), (B, m))
        if check_bound:
            check_disturbance(sample, bound, t)
        return sample

    t_rows = np.empty(count)
    x_rows = np.empty((count, B, n))
    un_rows = np.empty((count, B, m))
    ua_rows = np.empty((count, B, m))
    d_rows = np.empty((count, B, m))
    e_rows = np.empty((count, B, p))
    h_rows = np.empty((count, B))
    sat_rows = np.zeros((count, B), dtype=bool)

    def finish(k):
        out = []
        for b in range(B):
            h = h_rows[:k, b].copy()
            if schedule is not None:
                gT = np.asarray(gamma_tissf(alpha, schedule, h, d_inf), dtype=float)
            else:
                gT = np.zeros(k)
            out.append(
                Trajectory(
                    dt=dt,
                    t=t_rows[:k].copy(),
                    x=x_rows[:k, b].copy(),
                    u_nominal=un_rows[:k, b].copy(),
                    u_applied=ua_rows[:k, b].copy(),
                    d=d_rows[:k, b].copy(),
                    e=e_rows[:k, b].copy(),
                    h=h,
                    gamma_T=gT,
                    h_dT=h + gT,
                    saturated=sat_rows[:k, b].copy(),
                    meta={"system": system.name, "d_inf": d_inf},
                )
            )
        return out

    def stage_input(u, xs, es):
        if hold:
            return u
        us = controller.apply(system, barrier, xs, es)
        if input_bounds is not None:
            us = np.clip(us, input_bounds[0], input_bounds[1])
        return us

    for k in range(count):
        t = k * dt
        e = exo(t)
        try:
            u_nom = controller.nominal(x, e)
            u = controller.apply(system, barrier, x, e)
        except InfeasibleFilterError as exc:
            raise SimulationAborted(f"filter infeasible at t={t:g}: {exc}", finish(k), exc) from exc
        if input_bounds is not None:
            u_sat = np.clip(u, input_bounds[0], input_bounds[1])
            sat_rows[k] = np.any(u_sat != u, axis=-1)
            u = u_sat
        t_rows[k] = t
        x_rows[k] = x
        un_rows[k] = u_nom
        ua_rows[k] = u
        d_rows[k] = dist(t, x)
        e_rows[k] = e
        h_rows[k] = barrier.h(x)
        if k == steps:
            break
        half = t + dt / 2
        e_half, e_end = exo(half), exo(t + dt)
        try:
            k1 = system.rhs(x, e, u + d_rows[k])
            xs = x + dt / 2 * k1
            k2 = system.rhs(xs, e_half, stage_input(u, xs, e_half) + dist(half, xs))
            xs = x + dt / 2 * k2
            k3 = system.rhs(xs, e_half, stage_input(u, xs, e_half) + dist(half, xs))
            xs = x + dt * k3
            k4 = system.rhs(xs, e_end, stage_input(u, xs, e_end) + dist(t + dt, xs))
        except InfeasibleFilterError as exc:
            raise SimulationAborted(f"filter infeasible within step at t={t:g}: {exc}", finish(k + 1), exc) from exc
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if lower is not None:
            x = np.maximum(x, lower)
        if not np.isfinite(x).all() or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            raise SimulationAborted(f"state diverged at t={t + dt:g}", finish(k + 1))
    return finish(count)
