"""JSON scenario configuration, scenario assembly and parameter sweeps."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import core, filters, systems
from .cert import audit_trajectory
from .sim import LeadProfile, ingest_lead_csv, integrate_batch, synth_emergency_brake

SCHEMA_VERSION = 1

FILTER_TYPES = ("nominal", "issf_additive", "tissf_additive", "tissf_qp", "cbf_qp")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemConfig(_Strict):
    name: Literal["double_integrator", "truck_ccc"]
    params: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known_params(self):
        if self.params and self.name != "truck_ccc":
            raise ValueError("params overrides are only defined for truck_ccc")
        known = {f.name for f in fields(systems.TruckParams)}
        unknown = sorted(set(self.params) - known)
        if unknown:
            raise ValueError(f"unknown truck parameter(s): {', '.join(unknown)}")
        return self


class FilterConfig(_Strict):
    """Filter and epsilon schedule; ``lambda1 = None`` means a constant schedule."""

    type: Literal["nominal", "issf_additive", "tissf_additive", "tissf_qp", "cbf_qp"]
    eps0: Optional[float] = Field(default=None, gt=0)
    lambda1: Optional[float] = Field(default=None, ge=0)
    lambda0: float = 0.0
    alpha_gain: float = Field(default=1.0, gt=0)
    margin: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _needs_eps(self):
        if self.type in ("issf_additive", "tissf_additive", "tissf_qp") and self.eps0 is None:
            raise ValueError(f"filter type {self.type} requires eps0")
        if self.type == "issf_additive" and self.lambda1 is not None:
            raise ValueError("issf_additive uses a constant gain; drop lambda1")
        return self

    def schedule(self):
        if self.eps0 is None:
            return None
        if self.lambda1 is None or self.type == "issf_additive":
            return core.ConstantEpsilon(self.eps0)
        return core.ExponentialEpsilon(self.eps0, self.lambda1, self.lambda0)


class DisturbanceConfig(_Strict):
    type: Literal["zero", "sinusoid", "bias", "sampled", "drag", "sum"]
    amplitude: Optional[float] = None
    omega: float = 1.0
    phase: Union[float, Literal["random"]] = 0.0
    value: Optional[float] = None
    times: Optional[list[float]] = None
    values: Optional[list[float]] = None
    c0: Optional[float] = None
    c1: Optional[float] = None
    index: int = 1
    parts: Optional[list["DisturbanceConfig"]] = None
    declared_bound: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _fields_for_type(self):
        need = {
            "sinusoid": ("amplitude",),
            "bias": ("value",),
            "sampled": ("times", "values"),
            "drag": ("c0", "c1", "declared_bound"),
            "sum": ("parts",),
        }.get(self.type, ())
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"disturbance type {self.type} requires {', '.join(missing)}")
        return self


class LeadConfig(_Strict):
    type: Literal["synthetic", "csv"]
    v0: float = Field(default=15.0, ge=0)
    a_min: float = Field(default=-8.0, lt=0)
    t_start: float = Field(default=1.0, ge=0)
    jerk: Optional[float] = Field(default=None, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _path_for_csv(self):
        if self.type == "csv" and not self.path:
            raise ValueError("csv lead profile requires path")
        return self


class Tolerances(_Strict):
    tol: float = Field(default=1e-3, ge=0)
    fd_tol: float = Field(default=1e-2, ge=0)


class CertifyConfig(_Strict):
    lower: list[float]
    upper: list[float]
    resolution: Union[int, list[int]] = 21
    e_values: Optional[list[list[float]]] = None
    boundary_band: Optional[float] = Field(default=None, gt=0)

    @field_validator("resolution")
    @classmethod
    def _res(cls, v):
        values = v if isinstance(v, list) else [v]
        if any(r < 2 for r in values):
            raise ValueError("resolution must be at least 2 per axis")
        return v

    @model_validator(mode="after")
    def _box(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("region is empty (lower > upper)")
        return self


class SweepConfig(_Strict):
    eps0: Optional[list[float]] = None
    lambda1: Optional[list[Optional[float]]] = None
    lambda0: Optional[list[float]] = None
    d_bound: Optional[list[float]] = None
    filter: Optional[list[Literal["nominal", "issf_additive", "tissf_additive", "tissf_qp", "cbf_qp"]]] = None


class ScenarioConfig(_Strict):
    schema_version: Literal[1] = 1
    name: str = "scenario"
    system: SystemConfig
    filter: FilterConfig
    disturbance: DisturbanceConfig = DisturbanceConfig(type="zero")
    lead_profile: Optional[LeadConfig] = None
    x0: Optional[list[float]] = None
    x0_grid: Optional[list[list[float]]] = None
    dt: float = Field(default=1e-3, gt=0)
    horizon: float = Field(default=20.0, gt=0)
    input_bounds: Union[Literal["plant"], list[list[float]], None] = None
    tolerances: Tolerances = Tolerances()
    certify: Optional[CertifyConfig] = None
    sweep: Optional[SweepConfig] = None
    state: Optional[list[float]] = None
    e: Optional[list[float]] = None
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        n = 2 if self.system.name == "double_integrator" else 3
        for label, vec in [("x0", self.x0), ("state", self.state)]:
            if vec is not None and len(vec) != n:
                raise ValueError(f"{label} must have length {n} for {self.system.name}")
        for row in self.x0_grid or []:
            if len(row) != n:
                raise ValueError(f"x0_grid rows must have length {n}")
        if self.certify is not None and len(self.certify.lower) != n:
            raise ValueError(f"certify box must have {n} axes")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least dt")
        if isinstance(self.input_bounds, list):
            if len(self.input_bounds) != 2 or any(len(r) != 1 for r in self.input_bounds):
                raise ValueError("input_bounds must be [[lower], [upper]]")
            if self.input_bounds[0][0] > self.input_bounds[1][0]:
                raise ValueError("input_bounds lower exceeds upper")
        return self


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict | str | Path) -> ScenarioConfig:
    """Validate a config mapping, JSON text, or path to a JSON file."""
    if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
        try:
            text = Path(data).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        data = text
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Building runtime objects
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    plant: systems.Plant
    filter: object
    disturbance: object
    lead: LeadProfile | None
    x0s: np.ndarray
    dt: float
    horizon: float
    input_bounds: tuple | None
    alpha: core.LinearClassK
    schedule: object
    d_inf: float


def build_plant(cfg: SystemConfig) -> systems.Plant:
    if cfg.name == "double_integrator":
        return systems.double_integrator()
    return systems.truck_ccc(systems.TruckParams(**cfg.params))


def build_disturbance(cfg: DisturbanceConfig, rng: np.random.Generator | None = None):
    rng = np.random.default_rng(0) if rng is None else rng
    kind = cfg.type
    if kind == "zero":
        return core.ZeroDisturbance()
    if kind == "sinusoid":
        phase = rng.uniform(0.0, 2 * math.pi) if cfg.phase == "random" else float(cfg.phase)
        return core.Sinusoid(cfg.amplitude, cfg.omega, phase, cfg.declared_bound)
    if kind == "bias":
        return core.ConstantBias(cfg.value, cfg.declared_bound)
    if kind == "sampled":
        return core.SampledSeries(np.array(cfg.times), np.array(cfg.values), cfg.declared_bound)
    if kind == "drag":
        return core.StateDrag(cfg.c0, cfg.c1, cfg.declared_bound, cfg.index)
    return core.SumDisturbance(tuple(build_disturbance(p, rng) for p in cfg.parts), cfg.declared_bound)


def build_filter(cfg: FilterConfig, nominal):
    alpha = core.LinearClassK(cfg.alpha_gain)
    sched = cfg.schedule()
    if cfg.type == "nominal":
        return filters.NominalFilter(nominal)
    if cfg.type == "issf_additive":
        return filters.IssfAdditive(nominal, cfg.eps0)
    if cfg.type == "tissf_additive":
        return filters.TissfAdditive(nominal, sched)
    if cfg.type == "tissf_qp":
        return filters.TissfQP(nominal, sched, alpha, cfg.margin)
    return filters.CbfQP(nominal, alpha, cfg.margin)


def build_lead(cfg: LeadConfig | None, dt: float, horizon: float, base_dir: Path | None = None):
    if cfg is None:
        return None
    if cfg.type == "synthetic":
        return synth_emergency_brake(cfg.v0, cfg.a_min, cfg.t_start, cfg.jerk, dt=dt, t_end=horizon)
    path = Path(cfg.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return ingest_lead_csv(path, dt=dt)


def default_x0s(cfg: ScenarioConfig, plant: systems.Plant) -> np.ndarray:
    if cfg.system.name == "double_integrator":
        return np.array([systems.di_state_on_level(l, x2) for l in (0.5, 1.0, 2.0) for x2 in (-1.0, 0.0, 1.0)])
    p = systems.TruckParams(**cfg.system.params)
    return np.array([[systems.truck_steady_headway(15.0, p), 15.0, 15.0]])


def build(cfg: ScenarioConfig, base_dir: Path | None = None) -> Scenario:
    plant = build_plant(cfg.system)
    rng = np.random.default_rng(cfg.seed)
    dist = build_disturbance(cfg.disturbance, rng)
    filt = build_filter(cfg.filter, plant.nominal)
    if cfg.x0_grid is not None:
        x0s = np.array(cfg.x0_grid, dtype=float)
    elif cfg.x0 is not None:
        x0s = np.array([cfg.x0], dtype=float)
    else:
        x0s = default_x0s(cfg, plant)
    if cfg.input_bounds == "plant":
        bounds = plant.input_bounds
    elif cfg.input_bounds is None:
        bounds = None
    else:
        bounds = (np.array(cfg.input_bounds[0]), np.array(cfg.input_bounds[1]))
    lead = build_lead(cfg.lead_profile, cfg.dt, cfg.horizon, base_dir)
    if lead is None and plant.system.p > 0:
        lead = None  # exogenous channel held at zero
    return Scenario(
        plant=plant,
        filter=filt,
        disturbance=dist,
        lead=lead,
        x0s=x0s,
        dt=cfg.dt,
        horizon=cfg.horizon,
        input_bounds=bounds,
        alpha=core.LinearClassK(cfg.filter.alpha_gain),
        schedule=cfg.filter.schedule(),
        d_inf=dist.bound,
    )


def run(scn: Scenario):
    """Simulate every initial condition of a scenario."""
    return integrate_batch(
        scn.plant.system,
        scn.plant.barrier,
        scn.filter,
        scn.disturbance,
        scn.x0s,
        scn.dt,
        scn.horizon,
        lead=scn.lead,
        input_bounds=scn.input_bounds,
        alpha=scn.alpha,
        schedule=scn.schedule,
        d_inf=scn.d_inf,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SUMMARY_HEADER = (
    "run_id",
    "eps0",
    "lambda1",
    "lambda0",
    "d_bound",
    "filter",
    "min_h",
    "min_h_dT",
    "max_intervention",
    "saturation_count",
)


def _with_bound(dist: dict, d: float) -> dict:
    kind = dist["type"]
    if kind == "sinusoid":
        return {**dist, "amplitude": d, "declared_bound": None}
    if kind == "bias":
        return {**dist, "value": math.copysign(d, dist["value"] or 1.0), "declared_bound": None}
    if kind == "zero":
        return {"type": "sinusoid", "amplitude": d} if d > 0 else dist
    if kind == "sum":
        parts = dist["parts"]
        total = sum(build_disturbance(DisturbanceConfig.model_validate(p)).bound for p in parts)
        if total == 0:
            raise ConfigError("cannot rescale a zero-bound sum disturbance")
        scaled = [_scale(p, d / total) for p in parts]
        return {**dist, "parts": scaled, "declared_bound": None}
    raise ConfigError(f"d_bound sweep not supported for disturbance type {kind}")


def _scale(dist: dict, factor: float) -> dict:
    kind = dist["type"]
    if kind == "sinusoid":
        return {**dist, "amplitude": dist["amplitude"] * factor, "declared_bound": None}
    if kind == "bias":
        return {**dist, "value": dist["value"] * factor, "declared_bound": None}
    if kind == "zero":
        return dist
    raise ConfigError(f"d_bound sweep cannot rescale a {kind} component")


def expand_grid(cfg: ScenarioConfig, grid: SweepConfig | None = None) -> list[ScenarioConfig]:
    """One config per combination of the sweep axes (cartesian product)."""
    grid = grid or cfg.sweep or SweepConfig()
    axes = {k: v for k, v in grid.model_dump().items() if v is not None}
    if any(len(v) == 0 for v in axes.values()):
        raise ConfigError("sweep axes must be nonempty")
    names = list(axes)
    base = cfg.model_dump(mode="json")
    out = []
    for combo in itertools.product(*(axes[k] for k in names)) if names else [()]:
        data = json.loads(json.dumps(base))
        data["sweep"] = None
        for key, val in zip(names, combo):
            if key == "filter":
                data["filter"]["type"] = val
            elif key == "d_bound":
                data["disturbance"] = _with_bound(data["disturbance"], val)
            else:
                data["filter"][key] = val
        if data["filter"]["type"] == "issf_additive":
            data["filter"]["lambda1"] = None
        out.append(parse_config(data))
    return out


def summarize(run_id: int, cfg: ScenarioConfig, trajs) -> dict:
    return {
        "run_id": run_id,
        "eps0": cfg.filter.eps0,
        "lambda1": cfg.filter.lambda1,
        "lambda0": cfg.filter.lambda0,
        "d_bound": build_disturbance(cfg.disturbance).bound,
        "filter": cfg.filter.type,
        "min_h": min(float(tr.h.min()) for tr in trajs),
        "min_h_dT": min(float(tr.h_dT.min()) for tr in trajs),
        "max_intervention": max(float(tr.intervention.max()) for tr in trajs),
        "saturation_count": sum(int(tr.saturated.sum()) for tr in trajs),
    }


def _run_one(args):
    run_id, data, base_dir = args
    cfg = ScenarioConfig.model_validate(data)
    return summarize(run_id, cfg, run(build(cfg, base_dir)))


def batch_sweep(
    cfg: ScenarioConfig,
    grid: SweepConfig | None = None,
    workers: int = 1,
    base_dir: Path | None = None,
) -> list[dict]:
    """Run every grid combination; rows come back sorted by ``run_id``."""
    configs = expand_grid(cfg, grid)
    jobs = [(i, c.model_dump(mode="json"), base_dir) for i, c in enumerate(configs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    return sorted(rows, key=lambda r: r["run_id"])


def write_summary_csv(rows: list[dict], path) -> None:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    with open(path, "w", newline="") as fh:
        fh.write(",".join(SUMMARY_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row[k]) for k in SUMMARY_HEADER) + "\n")


def audit_runs(scn: Scenario, trajs, tol: float, fd_tol: float):
    return [audit_trajectory(tr, scn.alpha, scn.schedule, scn.d_inf, tol, fd_tol) for tr in trajs]
