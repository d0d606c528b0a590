import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elsafe.dynamics import (ConstantInertiaModel, InnerLoopGains, State, TwoLinkModel, estimate_mu_bounds,
                             inner_loop_torque, lyapunov_value, step, tracking_step, two_link_dynamics)
from elsafe.errors import SingularInertia

ARM = TwoLinkModel()
angles = st.floats(-math.pi, math.pi)
rates = st.floats(-2, 2)


def _com(q, mdl=ARM):
    c1 = mdl.lc1 * np.array([math.cos(q[0]), math.sin(q[0])])
    elbow = mdl.l1 * np.array([math.cos(q[0]), math.sin(q[0])])
    c2 = elbow + mdl.lc2 * np.array([math.cos(q[0] + q[1]), math.sin(q[0] + q[1])])
    return c1, c2


def _mass_matrix_oracle(q, eps=1e-6):
    # M = sum m J^T J + I w^T w, Jacobians by central differences of the COM positions
    J = [np.zeros((2, 2)), np.zeros((2, 2))]
    for j in range(2):
        dq = np.zeros(2)
        dq[j] = eps
        a, b = _com(q + dq), _com(q - dq)
        for k in range(2):
            J[k][:, j] = (a[k] - b[k]) / (2 * eps)
    w1, w2 = np.array([1.0, 0.0]), np.array([1.0, 1.0])
    return (ARM.m1 * J[0].T @ J[0] + ARM.m2 * J[1].T @ J[1]
            + ARM.I1 * np.outer(w1, w1) + ARM.I2 * np.outer(w2, w2))


def _dM(q, i, eps=1e-6):
    dq = np.zeros(2)
    dq[i] = eps
    return (ARM.M(q + dq) - ARM.M(q - dq)) / (2 * eps)


@settings(max_examples=100, deadline=None)
@given(angles, angles)
def test_inertia_matches_kinetic_energy(a, b):
    q = np.array([a, b])
    np.testing.assert_allclose(ARM.M(q), _mass_matrix_oracle(q), atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(angles, angles, rates, rates)
def test_coriolis_matches_christoffel(a, b, u, v):
    q, qd = np.array([a, b]), np.array([u, v])
    d = [_dM(q, i) for i in range(2)]
    c = np.array([sum(0.5 * (d[i][k, j] + d[j][k, i] - d[k][i, j]) * qd[i] * qd[j]
                      for i in range(2) for j in range(2)) for k in range(2)])
    np.testing.assert_allclose(ARM.C(q, qd) @ qd, c, atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(angles, angles)
def test_gravity_is_potential_gradient(a, b):
    q = np.array([a, b])
    V = lambda x: ARM.g * (ARM.m1 * _com(x)[0][1] + ARM.m2 * _com(x)[1][1])
    grad = [(V(q + e) - V(q - e)) / 2e-6 for e in np.eye(2) * 1e-6]
    np.testing.assert_allclose(ARM.N(q, np.zeros(2)), grad, atol=1e-7)


def test_horizontal_arm_static_torque():
    # lever arms: link 1 COM at 0.125, link 2 COM at 0.25 + 0.2
    tau1 = 2 * 9.81 * 0.125 + 3 * 9.81 * 0.45
    tau2 = 3 * 9.81 * 0.2
    np.testing.assert_allclose(ARM.N(np.zeros(2), np.zeros(2)), [tau1, tau2], rtol=1e-14)


def test_coriolis_vanishes_at_rest():
    np.testing.assert_array_equal(ARM.C(np.array([0.3, -1.2]), np.zeros(2)), np.zeros((2, 2)))


def test_skew_symmetry_random_states():
    rng = np.random.default_rng(0)
    for _ in range(100):
        q, qd = rng.uniform(-math.pi, math.pi, 2), rng.uniform(-2, 2, 2)
        Mdot = (ARM.M(q + 1e-6 * qd) - ARM.M(q - 1e-6 * qd)) / 2e-6
        S = Mdot - 2 * ARM.C(q, qd)
        for x in rng.standard_normal((10, 2)):
            assert abs(x @ S @ x) <= 1e-6


def test_uniform_rod_relations():
    assert ARM.lc1 == 0.125 and ARM.I1 == pytest.approx(2 * 0.25**2 / 12)
    M, C, N = two_link_dynamics(ARM, State([0.1, 0.2], [0.0, 0.0]))
    np.testing.assert_array_equal(M, M.T)


def test_joint_positions():
    p1, p2 = ARM.joint_positions([0.0, math.pi / 2])
    np.testing.assert_allclose(p1, [0.25, 0.0])
    np.testing.assert_allclose(p2, [0.25, 0.4], atol=1e-15)


def test_torque_law_examples():
    s = State([0.4, -0.7], [0.1, -0.2])
    g = InnerLoopGains(800)
    np.testing.assert_allclose(inner_loop_torque(ARM, s, s.qdot, g), ARM.N(s.q, s.qdot) + ARM.C(s.q, s.qdot) @ s.qdot)
    rest = State([0.4, -0.7], [0.0, 0.0])
    np.testing.assert_allclose(inner_loop_torque(ARM, rest, np.zeros(2), g), ARM.N(rest.q, rest.qdot))
    e = np.array([0.01, -0.02])
    diff = inner_loop_torque(ARM, s, s.qdot - e, g) - inner_loop_torque(ARM, s, s.qdot, g)
    np.testing.assert_allclose(diff, -ARM.C(s.q, s.qdot) @ e - 800 * e)


def test_gain_validation_and_requirement():
    with pytest.raises(ValueError):
        InnerLoopGains(0.0)
    g = InnerLoopGains(800)
    need = 2 * 2 * 10.0 * 3.0**3 * (0.1 + 0.3) / (2.0**2 * 0.01)
    assert g.required(10.0, 2.0, 3.0, 0.1, 0.3, 0.01) == pytest.approx(need)
    assert not g.admissible(10.0, 2.0, 3.0, 0.1, 0.3, 0.01)


@settings(max_examples=100, deadline=None)
@given(angles, angles, rates, rates, rates, rates)
def test_lyapunov_bounds(a, b, u, v, x, y):
    mu1, mu2 = estimate_mu_bounds(ARM)
    s = State([a, b], [u, v])
    vs = np.array([x, y])
    e2 = float(np.sum((s.qdot - vs) ** 2))
    V = lyapunov_value(ARM, s, vs)
    assert 0.5 * mu1 * e2 - 1e-15 <= V <= 0.5 * mu2 * e2 + 1e-15
    assert lyapunov_value(ARM, s, s.qdot) == 0.0


def test_mu_bounds_examples():
    assert estimate_mu_bounds(ConstantInertiaModel(np.diag([2.0, 3.0]))) == pytest.approx((1.98, 3.03))
    assert estimate_mu_bounds(ConstantInertiaModel(np.eye(2))) == pytest.approx((0.99, 1.01))
    mu1, mu2 = estimate_mu_bounds(ARM)
    assert 0 < mu1 < mu2
    with pytest.raises(ValueError):
        estimate_mu_bounds(ARM, 50)


def test_sampled_eigenvalues_inside_bounds():
    mu1, mu2 = estimate_mu_bounds(ARM, 1000, 0)
    for q in np.random.default_rng(9).uniform(-math.pi, math.pi, (500, 2)):
        e = np.linalg.eigvalsh(ARM.M(q))
        assert mu1 < e[0] and e[1] < mu2


def test_uniform_motion_is_exact():
    mdl = ConstantInertiaModel(np.diag([2.0, 3.0]))
    s = State([0.5, -0.25], [0.125, -0.5])
    for _ in range(64):
        s = step(mdl, s, lambda _: np.zeros(2), 0.0625)
    np.testing.assert_array_equal(s.q, [0.5 + 4 * 0.125, -0.25 - 4 * 0.5])
    np.testing.assert_array_equal(s.qdot, [0.125, -0.5])


def _oscillator_error(dt, T=1.0):
    mdl = ConstantInertiaModel(np.eye(1))
    s = State([1.0], [0.0])
    for _ in range(int(round(T / dt))):
        s = step(mdl, s, lambda st: -st.q, dt)
    return abs(s.q[0] - math.cos(T))


def test_rk4_fourth_order():
    e1, e2 = _oscillator_error(0.1), _oscillator_error(0.05)
    assert math.log2(e1 / e2) >= 3.8


def test_sampled_mode_is_first_order_in_torque():
    mdl = ConstantInertiaModel(np.eye(1))
    s = State([1.0], [0.0])
    a = step(mdl, s, lambda st: -st.q, 0.1, "sampled")
    b = step(mdl, s, lambda st: -st.q, 0.1, "continuous")
    # held torque -1: q = 1 - dt^2/2
    assert a.q[0] == pytest.approx(1 - 0.005, abs=1e-15)
    assert abs(a.q[0] - b.q[0]) > 1e-6
    with pytest.raises(ValueError):
        step(mdl, s, lambda st: -st.q, 0.1, "other")
    with pytest.raises(ValueError):
        step(mdl, s, lambda st: -st.q, 0.0)


def test_passivity_audit():
    # torque-driven arm: kinetic-energy change matches supplied power net of gravity
    def power_gap(dt):
        s = State([0.3, -0.5], [0.2, -0.1])
        u_fn = lambda st: np.array([0.5, -0.3]) + ARM.N(st.q, st.qdot) * 0.5
        worst = 0.0
        for _ in range(int(round(0.2 / dt))):
            u = u_fn(s)
            T0 = 0.5 * s.qdot @ ARM.M(s.q) @ s.qdot
            nxt = step(ARM, s, u_fn, dt, "sampled")
            T1 = 0.5 * nxt.qdot @ ARM.M(nxt.q) @ nxt.qdot
            worst = max(worst, abs((T1 - T0) / dt - s.qdot @ (u - ARM.N(s.q, s.qdot))))
            s = nxt
        return worst
    g1, g2 = power_gap(1e-3), power_gap(5e-4)
    assert g2 < 0.6 * g1 and g2 < 0.05


def test_tracking_step_constant_inertia():
    M = np.diag([2.0, 3.0])
    mdl = ConstantInertiaModel(M)
    s = State([0.0, 0.0], [0.0, 0.0])
    vs = np.array([0.1, -0.2])
    nxt, u = tracking_step(mdl, s, vs, InnerLoopGains(800), 1e-3)
    expect = np.linalg.solve(M + 0.8 * np.eye(2), 0.8 * vs)
    np.testing.assert_allclose(nxt.qdot, expect)
    np.testing.assert_allclose(nxt.q, 1e-3 * expect)
    np.testing.assert_allclose(u, -800 * (expect - vs))


def test_tracking_step_stays_stable_for_stiff_gain():
    s = State([1.5208, -1.0], [0.0, 0.0])
    vs = np.array([0.2, 0.1])
    g = InnerLoopGains(800)
    for _ in range(200):
        s, _ = tracking_step(ARM, s, vs, g, 1e-3)
    np.testing.assert_allclose(s.qdot, vs, atol=1e-9)


def test_singular_inertia():
    mdl = ConstantInertiaModel(np.diag([1.0, 1e-14]))
    s = State([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(SingularInertia):
        mdl.accel(s, np.zeros(2))
    with pytest.raises(SingularInertia):
        tracking_step(mdl, s, np.zeros(2), InnerLoopGains(1.0), 1e-3)


def test_state_validation():
    with pytest.raises(ValueError):
        State([0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        State([np.nan, 0.0], [0.0, 0.0])
    s = State(np.array([1.0], dtype=np.longdouble), [0.0])
    assert s.q.dtype == np.longdouble and s.qdot.dtype == np.longdouble
