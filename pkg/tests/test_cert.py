import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tissf import cert
from tissf.cert import (
    CertificationReport,
    apos_margin,
    audit_trajectory,
    certify_grid,
    eps_condition_slack,
    gamma_issf,
    gamma_tissf,
    h_d_and_h_dT,
    iota,
)
from tissf.core import ConstantEpsilon, ExponentialEpsilon, LinearClassK, Sinusoid, ZeroDisturbance
from tissf.filters import NominalFilter, TissfAdditive
from tissf.sim import Trajectory, integrate
from tissf.systems import di_nominal

ID = LinearClassK(1.0)
EXP_SCHED = ExponentialEpsilon(1.0, 2.0, -2.0)


@pytest.mark.parametrize("eps0, d, expected", [(1, 3, 2.25), (0.1, 3, 0.225), (5.0, 0, 0.0)])
def test_iota(eps0, d, expected):
    assert iota(eps0, d) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "c, eps0, d, expected",
    [(1.0, 1.0, 3.0, 2.25), (2.0, 1.0, 3.0, 1.125), (1.0, 0.7, 0.0, 0.0)],
)
def test_gamma_issf(c, eps0, d, expected):
    assert gamma_issf(LinearClassK(c), eps0, d) == pytest.approx(expected, abs=1e-15)


def test_gamma_issf_equals_iota_for_identity_alpha(rng):
    for eps0, d in rng.uniform(0.01, 10, size=(100, 2)):
        assert gamma_issf(ID, eps0, d) == pytest.approx(iota(eps0, d), rel=1e-15)


def test_gamma_issf_strictly_increasing(rng):
    alpha = LinearClassK(1.3)
    for eps0, d, de, dd in rng.uniform(0.01, 10, size=(1000, 4)):
        base = gamma_issf(alpha, eps0, d)
        assert gamma_issf(alpha, eps0 + de, d) > base
        assert gamma_issf(alpha, eps0, d + dd) > base


@pytest.mark.parametrize("bad", [(0.0, 1.0), (-1.0, 1.0), (1.0, -1.0)])
def test_gamma_issf_rejects_bad_inputs(bad):
    with pytest.raises(ValueError):
        gamma_issf(ID, *bad)


@pytest.mark.parametrize(
    "h, d, expected",
    [(0.0, 3.0, math.exp(-2) * 9 / 4), (1.0, 3.0, 2.25), (0.4, 0.0, 0.0)],
)
def test_gamma_tissf(h, d, expected):
    assert float(gamma_tissf(ID, EXP_SCHED, h, d)) == pytest.approx(expected, rel=1e-12, abs=0)


@given(eps0=st.floats(1e-3, 100), h=st.floats(-20, 20), d=st.floats(0, 50), c=st.floats(0.1, 10))
def test_constant_schedule_gamma_tissf_equals_gamma_issf(eps0, h, d, c):
    alpha = LinearClassK(c)
    assert float(gamma_tissf(alpha, ConstantEpsilon(eps0), h, d)) == pytest.approx(gamma_issf(alpha, eps0, d), rel=1e-14)


def test_gamma_tissf_increasing_in_d(rng):
    for h, d, dd in zip(rng.uniform(-3, 3, 200), rng.uniform(0, 5, 200), rng.uniform(0.01, 5, 200)):
        assert gamma_tissf(ID, EXP_SCHED, h, d + dd) > gamma_tissf(ID, EXP_SCHED, h, d)


def test_h_d_and_h_dT_examples(di):
    assert h_d_and_h_dT(di.barrier, ID, ConstantEpsilon(1.0), 3.0, np.zeros(2)) == pytest.approx((0.0, 2.25, 2.25))
    h, h_d, h_dT = h_d_and_h_dT(di.barrier, ID, EXP_SCHED, 3.0, np.array([-0.2, 0.0]))
    # oracle: h_dT = h + (9/4) exp(2 h - 2)
    assert h == pytest.approx(-0.2)
    assert h_dT == pytest.approx(-0.2 + 2.25 * math.exp(2 * -0.2 - 2), rel=1e-12)
    assert h_d == pytest.approx(-0.2 + 2.25)


def test_zero_disturbance_recovers_original_set(di, rng):
    for x in rng.uniform(-3, 3, size=(50, 2)):
        h, h_d, h_dT = h_d_and_h_dT(di.barrier, ID, EXP_SCHED, 0.0, x)
        assert h == h_d == h_dT


@given(x1=st.floats(-5, 5), x2=st.floats(-5, 5), d=st.floats(1e-3, 10), eps0=st.floats(1e-2, 10), lam1=st.floats(0, 3))
def test_set_nesting(x1, x2, d, eps0, lam1):
    from tissf.systems import double_integrator

    b = double_integrator().barrier
    h, h_d, h_dT = h_d_and_h_dT(b, ID, ExponentialEpsilon(eps0, lam1, -1.0), d, np.array([x1, x2]))
    assert h < h_d and h < h_dT


@pytest.mark.parametrize(
    "schedule, h, expected",
    [
        (EXP_SCHED, 0.0, 2 * math.exp(-2) + 4 / 9),
        (ConstantEpsilon(0.3), 1.7, 4 / 9),
        (ConstantEpsilon(7.0), -3.0, 4 / 9),
    ],
)
def test_eps_condition_slack_examples(schedule, h, expected):
    assert eps_condition_slack(ID, schedule, h, 3.0) == pytest.approx(expected, abs=1e-12)


def test_eps_condition_slack_general_alpha():
    # alpha^{-1}'(r) = 1/c, so the second term is 4 c / d^2
    assert eps_condition_slack(LinearClassK(2.5), ConstantEpsilon(1.0), 0.0, 2.0) == pytest.approx(2.5)


def test_eps_condition_slack_vacuous_without_disturbance():
    assert eps_condition_slack(ID, EXP_SCHED, 0.0, 0.0) == math.inf


def test_eps_condition_randomized(rng):
    draws = 10_000
    h = rng.uniform(-10, 10, draws)
    lam1 = rng.uniform(0, 5, draws)
    eps0 = rng.uniform(1e-3, 10, draws)
    d = rng.uniform(1e-3, 10, draws)
    c = rng.uniform(0.1, 5, draws)
    for i in range(draws):
        s = eps_condition_slack(LinearClassK(c[i]), ExponentialEpsilon(eps0[i], lam1[i], -1.0), h[i], d[i])
        assert s > 0


def test_apos_positivity_by_finite_difference(rng):
    for _ in range(1000):
        sched = ExponentialEpsilon(rng.uniform(0.01, 3), rng.uniform(0, 3), rng.uniform(-3, 1))
        alpha = LinearClassK(rng.uniform(0.2, 5))
        d = rng.uniform(0.01, 5)
        h = rng.uniform(-3, 3)
        assert eps_condition_slack(alpha, sched, h, d) > 0
        step = 1e-6
        fd = (gamma_tissf(alpha, sched, h + step, d) - gamma_tissf(alpha, sched, h - step, d)) / (2 * step)
        assert 1.0 + fd > 0
        assert float(apos_margin(alpha, sched, h, d)) == pytest.approx(1.0 + fd, rel=1e-5, abs=1e-6)


def test_certify_grid_tissf_double_integrator(di):
    spec = TissfAdditive(di_nominal, EXP_SCHED)
    r = certify_grid(di.system, di.barrier, ID, EXP_SCHED, spec, [-3, -3], [3, 3], 61, 3.0)
    assert r.grid_size == 61 * 61
    assert r.min_tissf_slack == pytest.approx(1.0, rel=1e-9)
    assert r.min_eps_cond_slack == pytest.approx(4 / 9, rel=1e-4)
    assert r.min_grad_norm_on_boundary == pytest.approx(math.sqrt(2))
    assert r.certified


def test_certify_grid_nominal_fails(di):
    r = certify_grid(di.system, di.barrier, ID, EXP_SCHED, NominalFilter(di_nominal), [-3, -3], [3, 3], 61, 3.0)
    # oracle: slack 1 - 1/eps(h) is smallest at the lowest h on the grid, h = -6
    assert r.min_tissf_slack == pytest.approx(1.0 - 1.0 / EXP_SCHED(-6.0), rel=1e-12)
    assert r.argmin_state == [-3.0, 3.0]
    assert not r.certified


def test_certify_grid_zero_disturbance(di):
    spec = TissfAdditive(di_nominal, EXP_SCHED)
    r = certify_grid(di.system, di.barrier, ID, EXP_SCHED, spec, [-1, -1], [1, 1], 5, 0.0)
    assert r.min_eps_cond_slack == math.inf and r.certified


def test_certify_grid_reports_infeasible_node():
    from tissf.core import Barrier, SystemModel
    from tissf.filters import CbfQP

    sys = SystemModel(1, 1, 0, lambda x, e: np.full_like(x, -2.0), lambda x: np.zeros(np.shape(x) + (1,)))
    bar = Barrier(lambda x: x[..., 0], lambda x: np.ones_like(x))
    k = lambda x, e: np.zeros(np.shape(x)[:-1] + (1,))
    r = certify_grid(sys, bar, ID, EXP_SCHED, CbfQP(k), [0.0], [2.0], 3, 1.0)
    assert r.infeasible_state is not None and not r.certified


def test_certify_grid_resolution_checked(di):
    with pytest.raises(ValueError):
        certify_grid(di.system, di.barrier, ID, EXP_SCHED, NominalFilter(di_nominal), [-1, -1], [1, 1], 1, 3.0)
    with pytest.raises(ValueError):
        cert.grid_nodes([1.0, 0.0], [0.0, 1.0], 3)


def test_certification_merge_matches_whole_grid(di):
    spec = NominalFilter(di_nominal)
    nodes = cert.grid_nodes([-3, -3], [3, 3], 21)
    args = (di.system, di.barrier, ID, EXP_SCHED, spec, [-3, -3], [3, 3], 21, 3.0)
    whole = certify_grid(*args, boundary_band=0.4)
    a = certify_grid(*args, boundary_band=0.4, nodes=nodes[:200])
    b = certify_grid(*args, boundary_band=0.4, nodes=nodes[200:])
    for merged in (a.merge(b), b.merge(a)):
        assert merged.grid_size == whole.grid_size
        assert merged.min_tissf_slack == whole.min_tissf_slack
        assert merged.min_grad_norm_on_boundary == whole.min_grad_norm_on_boundary
        assert merged.boundary_nodes == whole.boundary_nodes
        assert merged.certified == whole.certified


def test_report_text_format():
    r = CertificationReport(4, 1.0, [0.0, 1.0], 0.5, 1.4, True)
    text = r.to_text()
    assert "certified=true\n" in text
    assert "argmin_state=[0.0,1.0]\n" in text
    assert text.count("\n") == len(r.as_dict())


@pytest.fixture(scope="module")
def tissf_run():
    from tissf.systems import double_integrator

    p = double_integrator()
    return integrate(
        p.system, p.barrier, TissfAdditive(di_nominal, EXP_SCHED), Sinusoid(3.0), np.array([2.0, 0.0]),
        dt=1e-3, T=20.0, alpha=ID, schedule=EXP_SCHED,
    )


def test_audit_tissf_trajectory(tissf_run):
    rep = audit_trajectory(tissf_run, ID, EXP_SCHED, 3.0)
    assert rep.min_h_dT >= -1e-3
    assert rep.min_diff_bound_slack >= -1e-2
    assert rep.disturbance_bound_violations == 0
    assert rep.samples == 20001
    assert rep.passed


def test_audit_counts_bound_violations(tissf_run):
    rep = audit_trajectory(tissf_run, ID, EXP_SCHED, 3.0, bound=2.0)
    assert rep.disturbance_bound_violations > 0 and not rep.passed


def test_audit_nominal_undisturbed(di):
    tr = integrate(di.system, di.barrier, NominalFilter(di_nominal), ZeroDisturbance(), np.array([2.0, 0.0]), T=5.0)
    rep = audit_trajectory(tr, ID, None, 0.0)
    assert rep.min_h >= -1e-9 and rep.passed


def test_audit_rejects_nonuniform_grid(tissf_run):
    bad = Trajectory(**{**tissf_run.__dict__, "t": tissf_run.t ** 1.01})
    with pytest.raises(ValueError):
        audit_trajectory(bad, ID, EXP_SCHED, 3.0)
