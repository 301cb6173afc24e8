import math

import numpy as np
import pytest

from tissf.core import ConstantBias, LinearClassK, Sinusoid, ZeroDisturbance
from tissf.filters import IssfAdditive, NominalFilter, TissfQP
from tissf.core import Barrier, ExponentialEpsilon, SystemModel
from tissf.sim import (
    LeadProfile,
    LeadProfileError,
    SimulationAborted,
    ingest_lead_csv,
    integrate,
    integrate_batch,
    read_trajectory_csv,
    synth_emergency_brake,
)
from tissf.systems import di_equilibrium, di_nominal


def test_equilibrium_is_root_of_closed_loop():
    eq = di_equilibrium()
    # x2 = 0 and x1 - 2 x2 - 1 = 0
    np.testing.assert_allclose(eq, [1.0, 0.0], atol=1e-12)


def test_undisturbed_nominal_converges_to_equilibrium(di):
    tr = integrate(di.system, di.barrier, NominalFilter(di_nominal), ZeroDisturbance(), np.array([2.0, 0.0]))
    assert np.linalg.norm(tr.x[-1] - di_equilibrium()) < 1e-3
    assert tr.h.min() >= -1e-9
    assert len(tr) == 20001 and tr.t[-1] == pytest.approx(20.0)


def test_disturbance_breaks_nominal_safety(di):
    tr = integrate(di.system, di.barrier, NominalFilter(di_nominal), Sinusoid(3.0), np.array([2.0, 0.0]), T=10.0)
    assert tr.h.min() < 0


def test_issf_keeps_expanded_set(di):
    tr = integrate(di.system, di.barrier, IssfAdditive(di_nominal, 1.0), Sinusoid(3.0), np.array([2.0, 0.0]), T=10.0)
    assert tr.h.min() >= -2.25 - 1e-3


def test_rows_are_populated(di):
    sched = ExponentialEpsilon(1, 2, -2)
    tr = integrate(
        di.system, di.barrier, IssfAdditive(di_nominal, 1.0), Sinusoid(3.0), np.array([0.5, 0.0]),
        dt=0.01, T=1.0, schedule=sched,
    )
    np.testing.assert_allclose(tr.d[:, 0], 3 * np.sin(tr.t), atol=1e-15)
    np.testing.assert_allclose(tr.u_applied - tr.u_nominal, -1.0)
    np.testing.assert_allclose(tr.h, tr.x[:, 0] - tr.x[:, 1])
    np.testing.assert_allclose(tr.gamma_T, 2.25 * np.exp(2 * tr.h - 2))
    np.testing.assert_allclose(tr.h_dT, tr.h + tr.gamma_T)
    assert tr.e.shape == (101, 0)
    assert np.all(np.isfinite(tr.x))


def test_energy_free_linear_solution(di):
    # u = 0, d = 0: x2 constant, x1(t) = x1(0) - x2 t
    zero = NominalFilter(lambda x, e: np.zeros(np.shape(x)[:-1] + (1,)))
    tr = integrate(di.system, di.barrier, zero, ZeroDisturbance(), np.array([0.3, -0.7]), dt=1e-3, T=1.0)
    np.testing.assert_allclose(tr.x[:, 1], -0.7, atol=1e-12)
    np.testing.assert_allclose(tr.x[:, 0], 0.3 + 0.7 * tr.t, atol=1e-8)


def test_constant_input_matches_closed_form(di):
    # u = 1: x2 = x20 + t, x1 = x10 - x20 t - t^2 / 2 (exact for RK4)
    one = NominalFilter(lambda x, e: np.ones(np.shape(x)[:-1] + (1,)))
    tr = integrate(di.system, di.barrier, one, ZeroDisturbance(), np.array([0.0, 0.5]), dt=0.01, T=1.0)
    np.testing.assert_allclose(tr.x[:, 1], 0.5 + tr.t, atol=1e-12)
    np.testing.assert_allclose(tr.x[:, 0], -0.5 * tr.t - tr.t**2 / 2, atol=1e-12)


def _terminal(di, dt, hold):
    return integrate(
        di.system, di.barrier, NominalFilter(di_nominal), ZeroDisturbance(), np.array([2.0, 0.0]),
        dt=dt, T=2.0, hold=hold,
    ).x[-1]


@pytest.mark.parametrize("dt", [0.1, 0.05])
def test_rk4_order_with_stage_evaluation(di, dt):
    ref = _terminal(di, dt / 8, False)
    ratio = np.linalg.norm(_terminal(di, dt, False) - ref) / np.linalg.norm(_terminal(di, dt / 2, False) - ref)
    assert 8 <= ratio <= 32


def test_zero_order_hold_is_first_order(di):
    ref = _terminal(di, 0.1 / 8, True)
    ratio = np.linalg.norm(_terminal(di, 0.1, True) - ref) / np.linalg.norm(_terminal(di, 0.05, True) - ref)
    assert 1.5 < ratio < 3


def test_batch_matches_single_runs(di):
    x0s = np.array([[2.0, 0.0], [0.5, -1.0], [3.0, 1.0]])
    spec = IssfAdditive(di_nominal, 0.5)
    batch = integrate_batch(di.system, di.barrier, spec, Sinusoid(3.0), x0s, dt=1e-2, T=5.0)
    for x0, tr in zip(x0s, batch):
        single = integrate(di.system, di.barrier, spec, Sinusoid(3.0), x0, dt=1e-2, T=5.0)
        np.testing.assert_array_equal(single.x, tr.x)
        np.testing.assert_array_equal(single.u_applied, tr.u_applied)


def test_determinism(di):
    runs = [
        integrate(di.system, di.barrier, IssfAdditive(di_nominal, 1.0), Sinusoid(3.0, 1.3, 0.2), np.array([1.0, 0.0]), T=3.0)
        for _ in range(2)
    ]
    np.testing.assert_array_equal(runs[0].x, runs[1].x)
    np.testing.assert_array_equal(runs[0].h, runs[1].h)


def test_saturation_is_flagged(di):
    spec = IssfAdditive(di_nominal, 0.1)
    bounds = (np.array([-2.0]), np.array([2.0]))
    tr = integrate(di.system, di.barrier, spec, ZeroDisturbance(), np.array([0.0, 0.0]), dt=1e-2, T=1.0, input_bounds=bounds)
    assert tr.saturated[0]
    assert tr.u_applied[0, 0] == -2.0 and tr.u_nominal[0, 0] == -1.0
    assert np.all(np.abs(tr.u_applied) <= 2.0)


def test_disturbance_bound_breach_aborts(di):
    from tissf.core import DisturbanceBoundError

    lying = Sinusoid(3.0, declared_bound=1.0)
    with pytest.raises(DisturbanceBoundError):
        integrate(di.system, di.barrier, NominalFilter(di_nominal), lying, np.array([1.0, 0.0]), dt=0.1, T=2.0)


def test_divergence_aborts_with_partial_trajectory():
    sys = SystemModel(1, 1, 0, lambda x, e: 5.0 * x, lambda x: np.ones(np.shape(x) + (1,)))
    bar = Barrier(lambda x: x[..., 0], lambda x: np.ones_like(x))
    zero = NominalFilter(lambda x, e: np.zeros(np.shape(x)[:-1] + (1,)))
    with pytest.raises(SimulationAborted) as info:
        integrate(sys, bar, zero, ZeroDisturbance(), np.array([1.0]), dt=0.01, T=10.0)
    tr = info.value.trajectory
    assert 0 < len(tr) < 1001
    assert np.all(np.isfinite(tr.x))


def test_infeasible_filter_aborts_with_partial_trajectory():
    # x = (y, clock); the input loses authority once the clock reaches 1 while
    # the drift keeps pulling h = y down faster than alpha(h) allows
    sys = SystemModel(
        2, 1, 0,
        lambda x, e: np.stack([np.full(np.shape(x)[:-1], -1.0), np.ones(np.shape(x)[:-1])], axis=-1),
        lambda x: np.stack([np.maximum(1.0 - x[..., 1], 0.0), np.zeros(np.shape(x)[:-1])], axis=-1)[..., None],
    )
    bar = Barrier(lambda x: x[..., 0], lambda x: np.broadcast_to([1.0, 0.0], np.shape(x)).copy())
    spec = TissfQP(lambda x, e: np.zeros(np.shape(x)[:-1] + (1,)), ExponentialEpsilon(1.0, 0.0), LinearClassK(1.0))
    with pytest.raises(SimulationAborted) as info:
        integrate(sys, bar, spec, ZeroDisturbance(), np.array([0.5, 0.0]), dt=0.01, T=5.0)
    assert info.value.cause is not None
    tr = info.value.trajectory
    assert 50 < len(tr) <= 101
    assert tr.h.min() >= 0


def test_truck_clamps_speeds(truck):
    lead = synth_emergency_brake(15.0, -8.0, 1.0)
    brake = NominalFilter(lambda x, e: np.full(np.shape(x)[:-1] + (1,), -6.0))
    tr = integrate(truck.system, truck.barrier, brake, ZeroDisturbance(), np.array([50.0, 10.0, 15.0]), T=7.0, lead=lead)
    assert tr.x[:, 1].min() == 0.0 and tr.x[:, 2].min() >= 0.0
    assert tr.x[-1, 2] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(dt=1.0, T=0.5)])
def test_integrate_rejects_bad_steps(di, bad):
    with pytest.raises(ValueError):
        integrate(di.system, di.barrier, NominalFilter(di_nominal), ZeroDisturbance(), np.zeros(2), **bad)


def test_trajectory_csv_round_trip(tmp_path, truck):
    lead = synth_emergency_brake(dt=0.01)
    tr = integrate(
        truck.system, truck.barrier, IssfAdditive(truck.nominal, 1.5), ConstantBias(0.5), np.array([28.0, 15.0, 15.0]),
        dt=0.01, T=3.0, lead=lead, input_bounds=truck.input_bounds, schedule=ExponentialEpsilon(1.5, 0.0),
    )
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x1,x2,x3,u_nom1,u_app1,d1,e1,h,gamma_T,h_dT,saturated"
    back = read_trajectory_csv(path, 3, 1, 1)
    for name in ("t", "x", "u_nominal", "u_applied", "d", "e", "h", "gamma_T", "h_dT", "saturated"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))


# ---------------------------------------------------------------------------
# Lead profiles
# ---------------------------------------------------------------------------


def test_rectangular_brake_stop_time():
    lead = synth_emergency_brake(15.0, -8.0, 1.0, dt=1e-3)
    stop = 1.0 + 15.0 / 8.0
    assert lead.a.min() == -8.0
    moving = lead.t[lead.v > 0]
    assert moving[-1] == pytest.approx(stop, abs=1e-3)
    assert np.all(lead.a[lead.t >= stop] == 0.0)
    assert lead.speed(0.5) == 15.0
    lead.validate()


def test_brake_from_standstill_is_all_zero():
    lead = synth_emergency_brake(0.0, -8.0, 0.0)
    assert np.all(lead.v == 0) and np.all(lead.a == 0)


@pytest.mark.parametrize("v0, jerk", [(15.0, 20.0), (15.0, 4.0), (1.0, 20.0)])
def test_jerk_limited_profile(v0, jerk):
    dt = 1e-3
    lead = synth_emergency_brake(v0, -8.0, 1.0, jerk=jerk, dt=dt)
    assert np.max(np.abs(np.diff(lead.a))) / dt <= jerk * (1 + 1e-9)
    assert lead.v[-1] == 0.0 and lead.a[-1] == 0.0
    if v0 >= 8.0 * 8.0 / jerk:
        assert lead.a.min() == pytest.approx(-8.0, abs=jerk * dt)
    lead.validate()


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_emergency_brake(15.0, 1.0)
    with pytest.raises(ValueError):
        synth_emergency_brake(-1.0)


def test_lead_csv_round_trip(tmp_path):
    lead = synth_emergency_brake(15.0, -8.0, 1.0, jerk=20.0, dt=1e-2)
    path = tmp_path / "lead.csv"
    lead.to_csv(path)
    back = ingest_lead_csv(path)
    assert len(back) == len(lead)
    for a, b in ((back.t, lead.t), (back.v, lead.v), (back.a, lead.a)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_lead_csv_comments_and_resampling(tmp_path):
    path = tmp_path / "lead.csv"
    path.write_text("# recorded run\nt,v_L,a_L\n0,10,-1\n# mid comment\n1,9,-1\n2,8,-1\n")
    lead = ingest_lead_csv(path)
    assert len(lead) == 3
    fine = ingest_lead_csv(path, dt=0.5)
    np.testing.assert_allclose(fine.t, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(fine.v, [10, 9.5, 9, 8.5, 8])


@pytest.mark.parametrize(
    "body, match",
    [
        ("t,v_L,a_L\n0,1,0\n1,-1,0\n", "row 1"),
        ("t,v_L,a_L\n0,1,0\n1,1\n", "row 1"),
        ("t,v_L,a_L\n0,1,0\n1,x,0\n", "row 1"),
        ("t,v,a\n0,1,0\n", "header"),
        ("t,v_L,a_L\n0,10,0\n1,12,0\n", "inconsistent"),
        ("t,v_L,a_L\n0,10,-12\n1,-2,-12\n", "row"),
        ("t,v_L,a_L\n", "no data"),
        ("t,v_L,a_L\n1,1,0\n0,1,0\n", "row 1"),
    ],
)
def test_lead_csv_errors_name_the_row(tmp_path, body, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(LeadProfileError, match=match):
        ingest_lead_csv(path)


def test_lead_profile_interpolation():
    lead = LeadProfile([0.0, 1.0], [10.0, 8.0], [-2.0, -2.0])
    assert lead.speed(0.5) == 9.0 and lead.accel(3.0) == -2.0
