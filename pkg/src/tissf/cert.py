"""Numerical certificates for the ISSf/TISSf guarantees.

Grid certification checks the barrier inequality and the epsilon-schedule
condition node by node; trajectory audits check the expanded-set invariance
and the differential bound ``hdot >= -alpha(h) - eps(h) |d|^2 / 4`` on
simulated data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import LinearClassK
from .filters import InfeasibleFilterError, tissf_condition_slack


def iota(eps0: float, d_inf: float) -> float:
    if eps0 <= 0 or d_inf < 0:
        raise ValueError("need eps0 > 0 and d_inf >= 0")
    return eps0 * d_inf**2 / 4.0


def gamma_issf(alpha: LinearClassK, eps0: float, d_inf: float) -> float:
    """``beta^{-1}(eps0 |d|^2 / 4)`` with ``beta(r) = -alpha(-r)``."""
    if eps0 <= 0 or d_inf < 0:
        raise ValueError("need eps0 > 0 and d_inf >= 0")
    # beta^{-1}(s) = -alpha^{-1}(-s)
    return float(-alpha.inv(-eps0 * d_inf**2 / 4.0))


def gamma_tissf(alpha: LinearClassK, schedule, h, d_inf: float):
    """``-alpha^{-1}(-eps(h) |d|^2 / 4)``; vectorises over ``h``."""
    if d_inf < 0:
        raise ValueError("d_inf must be non-negative")
    return -alpha.inv(-schedule(h) * d_inf**2 / 4.0)


def gamma_tissf_dh(alpha: LinearClassK, schedule, h, d_inf: float):
    """Partial derivative of ``gamma_tissf`` with respect to ``h``."""
    s = d_inf**2 / 4.0
    return alpha.inv_deriv(-schedule(h) * s) * schedule.deriv(h) * s


def h_d_and_h_dT(barrier, alpha, schedule, d_inf: float, x) -> tuple[float, float, float]:
    """``(h, h_d, h_dT)`` at ``x``.

    ``h_d`` uses the constant gain ``schedule.eps0``; for a constant
    schedule the two expanded functions coincide.
    """
    h = barrier.value(x)
    h_d = h + gamma_issf(alpha, schedule.eps0, d_inf)
    h_dT = h + float(gamma_tissf(alpha, schedule, h, d_inf))
    return h, h_d, h_dT


def eps_condition_slack(alpha: LinearClassK, schedule, h, d_inf: float) -> float:
    """``eps'(h) + (4/|d|^2) / alpha^{-1}'(-eps(h)|d|^2/4)``; must be > 0.

    Returns ``inf`` when ``d_inf == 0`` (the condition is vacuous).
    """
    if d_inf == 0:
        return math.inf
    if d_inf < 0:
        raise ValueError("d_inf must be non-negative")
    s = d_inf**2 / 4.0
    return float(schedule.deriv(h) + 1.0 / (s * alpha.inv_deriv(-schedule(h) * s)))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ",".join(_format_value(float(a)) for a in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


class _KeyValueReport:
    def as_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={_format_value(v)}\n" for k, v in self.as_dict().items())


@dataclass
class CertificationReport(_KeyValueReport):
    grid_size: int
    min_tissf_slack: float
    argmin_state: list
    min_eps_cond_slack: float
    min_grad_norm_on_boundary: float
    certified: bool
    boundary_nodes: int = 0
    infeasible_state: list | None = None

    def merge(self, other: "CertificationReport") -> "CertificationReport":
        """Min-reduce two partial reports over disjoint node sets."""
        best = self if self.min_tissf_slack <= other.min_tissf_slack else other
        infeasible = self.infeasible_state or other.infeasible_state
        merged = CertificationReport(
            grid_size=self.grid_size + other.grid_size,
            min_tissf_slack=min(self.min_tissf_slack, other.min_tissf_slack),
            argmin_state=best.argmin_state,
            min_eps_cond_slack=min(self.min_eps_cond_slack, other.min_eps_cond_slack),
            min_grad_norm_on_boundary=min(self.min_grad_norm_on_boundary, other.min_grad_norm_on_boundary),
            certified=False,
            boundary_nodes=self.boundary_nodes + other.boundary_nodes,
            infeasible_state=infeasible,
        )
        merged.certified = _verdict(merged)
        return merged


def _verdict(r: CertificationReport) -> bool:
    return (
        r.infeasible_state is None
        and r.min_tissf_slack > 0
        and r.min_eps_cond_slack > 0
        and r.min_grad_norm_on_boundary > 0
    )


@dataclass
class AuditReport(_KeyValueReport):
    samples: int
    min_h: float
    min_h_d: float
    min_h_dT: float
    min_diff_bound_slack: float
    fd_threshold: float
    saturation_count: int
    disturbance_bound_violations: int
    tol: float = 1e-3
    passed: bool = field(default=False)


# ---------------------------------------------------------------------------
# Grid certification
# ---------------------------------------------------------------------------


def grid_nodes(lower, upper, resolution) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    res = np.broadcast_to(np.asarray(resolution, dtype=int), lower.shape)
    if lower.shape != upper.shape or np.any(upper < lower):
        raise ValueError("region must be a nonempty box with lower <= upper")
    if np.any(res < 2):
        raise ValueError("resolution must be at least 2 per axis")
    axes = [np.linspace(lo, hi, r) for lo, hi, r in zip(lower, upper, res)]
    return np.array(list(itertools.product(*axes)))


def certify_grid(
    system,
    barrier,
    alpha,
    schedule,
    controller,
    lower,
    upper,
    resolution,
    d_inf: float,
    e_values=None,
    boundary_band: float | None = None,
    nodes: np.ndarray | None = None,
) -> CertificationReport:
    """Evaluate the TISSf inequality for ``controller`` on a box grid.

    At every node and every sampled exogenous value the slack
    ``L_f h + L_g h u + alpha(h) - |L_g h|^2 / eps(h)`` is computed for the
    filtered input ``u``; the worst case over ``e_values`` counts.  The
    epsilon-schedule condition is evaluated at ``h(node)`` and the gradient
    norm on nodes with ``|h| < boundary_band``.

    ``nodes`` lets a caller certify one partition of a larger grid.
    """
    if nodes is None:
        nodes = grid_nodes(lower, upper, resolution)
    if boundary_band is None:
        diameter = float(np.linalg.norm(np.asarray(upper, float) - np.asarray(lower, float)))
        boundary_band = 0.05 * diameter
    if e_values is None:
        e_values = [np.zeros(system.p)]
    e_values = [np.asarray(e, dtype=float).reshape(system.p) for e in e_values]

    min_slack, argmin = math.inf, None
    min_eps = math.inf
    min_grad = math.inf
    n_boundary = 0
    infeasible = None
    for x in nodes:
        h = barrier.value(x)
        for e in e_values:
            try:
                u = controller.apply(system, barrier, x, e)
            except InfeasibleFilterError:
                infeasible = x.tolist()
                min_slack, argmin = -math.inf, x.tolist()
                break
            slack = tissf_condition_slack(system, barrier, alpha, schedule, x, e, u)
            if slack < min_slack:
                min_slack, argmin = slack, x.tolist()
        if infeasible is not None:
            break
        min_eps = min(min_eps, eps_condition_slack(alpha, schedule, h, d_inf))
        if abs(h) < boundary_band:
            n_boundary += 1
            min_grad = min(min_grad, float(np.linalg.norm(barrier.gradient(x))))
    report = CertificationReport(
        grid_size=len(nodes),
        min_tissf_slack=float(min_slack),
        argmin_state=argmin,
        min_eps_cond_slack=float(min_eps),
        min_grad_norm_on_boundary=float(min_grad),
        certified=False,
        boundary_nodes=n_boundary,
        infeasible_state=infeasible,
    )
    report.certified = _verdict(report)
    return report


# ---------------------------------------------------------------------------
# Trajectory audit
# ---------------------------------------------------------------------------


def audit_trajectory(
    traj,
    alpha,
    schedule,
    d_inf: float,
    tol: float = 1e-3,
    fd_tol: float = 1e-2,
    bound: float | None = None,
) -> AuditReport:
    """Check a simulated run against the expanded-set guarantee.

    ``min_diff_bound_slack`` is the minimum over interior samples of
    ``hdot_fd + alpha(h) + eps(h) d_inf^2 / 4`` with a central-difference
    ``hdot_fd``.  ``fd_threshold`` is ``fd_tol * max(1, max|hdot_fd|)``; the
    audit passes when ``min_h_dT >= -tol`` and the slack is above
    ``-fd_threshold``.  ``schedule=None`` audits plain CBF safety
    (``h_d = h_dT = h``).
    """
    t = np.asarray(traj.t)
    if len(t) < 2:
        raise ValueError("trajectory needs at least two samples")
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("trajectory time grid is not uniform")
    dt = float(steps[0])
    h = np.asarray(traj.h, dtype=float)
    if schedule is None:
        h_d = h_dT = h
        margin = np.zeros_like(h)
    else:
        h_d = h + gamma_issf(alpha, schedule.eps0, d_inf)
        h_dT = h + gamma_tissf(alpha, schedule, h, d_inf)
        margin = schedule(h) * d_inf**2 / 4.0
    if len(t) >= 3:
        hdot = (h[2:] - h[:-2]) / (2 * dt)
        slack = hdot + alpha(h[1:-1]) + margin[1:-1]
        min_slack = float(np.min(slack))
        threshold = fd_tol * max(1.0, float(np.max(np.abs(hdot))))
    else:
        min_slack, threshold = math.inf, fd_tol
    bound = d_inf if bound is None else bound
    d_norm = np.linalg.norm(np.asarray(traj.d).reshape(len(t), -1), axis=1)
    violations = int(np.count_nonzero(d_norm > bound * (1 + 1e-12) + 1e-12))
    report = AuditReport(
        samples=len(t),
        min_h=float(np.min(h)),
        min_h_d=float(np.min(h_d)),
        min_h_dT=float(np.min(h_dT)),
        min_diff_bound_slack=min_slack,
        fd_threshold=threshold,
        saturation_count=int(np.count_nonzero(traj.saturated)),
        disturbance_bound_violations=violations,
        tol=tol,
    )
    report.passed = bool(report.min_h_dT >= -tol and min_slack >= -threshold and violations == 0)
    return report


def apos_margin(alpha, schedule, h, d_inf: float):
    """``1 + d gamma_T / d h``; positive wherever the epsilon condition holds."""
    return 1.0 + gamma_tissf_dh(alpha, schedule, h, d_inf)
