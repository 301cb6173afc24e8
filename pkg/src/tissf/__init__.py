"""Tunable input-to-state safe control barrier function safety filters."""

from .core import (
    Barrier,
    ConstantBias,
    ConstantEpsilon,
    ExponentialEpsilon,
    LinearClassK,
    SampledSeries,
    Sinusoid,
    StateDrag,
    SumDisturbance,
    SystemModel,
    ZeroDisturbance,
    epsilon_eval,
    lie_derivatives,
)
from .filters import (
    CbfQP,
    InfeasibleFilterError,
    IssfAdditive,
    NominalFilter,
    TissfAdditive,
    TissfQP,
    cbf_condition_slack,
    saturate,
    tissf_condition_slack,
)
from .cert import (
    audit_trajectory,
    certify_grid,
    eps_condition_slack,
    gamma_issf,
    gamma_tissf,
    h_d_and_h_dT,
    iota,
)
from .sim import (
    LeadProfile,
    SimulationAborted,
    Trajectory,
    ingest_lead_csv,
    integrate,
    integrate_batch,
    synth_emergency_brake,
)
from .scenario import ConfigError, ScenarioConfig, batch_sweep, parse_config
from .systems import TruckParams, double_integrator, truck_ccc

__version__ = "0.1.0"
