import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from formsim.errors import DegenerateGeometry, DegenerateReference
from formsim.nsb import (
    TaskConfig,
    barycenter_task_velocity,
    collision_avoidance_task,
    compose,
    decompose_refs,
    desired_yaw_rate,
    formation_task,
    g1,
    g2,
    lookahead,
    los_course,
    nsb_step,
    pinv,
    update_ca_activation,
)
from formsim.paths import PathErrors

CFG = TaskConfig()


# ---------------------------------------------------------------------------
# pseudoinverse
# ---------------------------------------------------------------------------

def test_pinv_unit_row():
    J = np.array([[1.0, 0.0, 0.0, 0.0]])
    assert np.allclose(pinv(J), J.T)


def test_pinv_zero_matrix():
    assert np.all(pinv(np.zeros((2, 4))) == 0.0)


def _check_mp_identities(J, Jp, tol=1e-10):
    assert np.abs(J @ Jp @ J - J).max() < tol
    assert np.abs(Jp @ J @ Jp - Jp).max() < tol
    assert np.abs((J @ Jp).T - J @ Jp).max() < tol
    assert np.abs((Jp @ J).T - Jp @ J).max() < tol


def test_pinv_moore_penrose_identities_bulk():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = rng.integers(1, 4)
        J = rng.normal(size=(m, 4))
        if rng.random() < 0.2:
            J[rng.integers(m)] = 0.0  # rank-deficient cases too
        _check_mp_identities(J, pinv(J))


@settings(max_examples=200)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_pinv_projector_properties(m, seed):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(m, 4))
    P = np.eye(4) - pinv(J) @ J
    assert np.abs(P @ P - P).max() < 1e-10
    assert np.abs(P - P.T).max() < 1e-10
    assert np.abs(J @ P).max() < 1e-10


# ---------------------------------------------------------------------------
# collision avoidance
# ---------------------------------------------------------------------------

def test_ca_unit_geometry():
    sigma, J, err = collision_avoidance_task((0.0, 0.0), (10.0, 0.0), CFG)
    assert sigma == 10.0
    assert np.allclose(J[0], [-1.0, 0.0, 0.0, 0.0])
    assert np.allclose(J[1], [0.0, 0.0, 1.0, 0.0])
    assert err == pytest.approx(10.0)


def test_ca_degenerate_geometry():
    with pytest.raises(DegenerateGeometry):
        collision_avoidance_task((1.0, 1.0), (1.0, 1.0 + 1e-9), CFG)


def test_ca_activation_hysteresis():
    assert not update_ca_activation(25.0, False, CFG)
    assert not update_ca_activation(20.0, False, CFG)  # strict threshold
    assert update_ca_activation(19.9, False, CFG)
    assert update_ca_activation(20.3, True, CFG)   # inside the band: stays on
    assert not update_ca_activation(20.6, True, CFG)


def test_ca_active_pushes_vessels_apart():
    # compare the closed-form step against a hand-assembled J^+ (lambda err)
    p1, p2 = (0.0, 0.0), (15.0, 0.0)
    sigma, J, err = collision_avoidance_task(p1, p2, CFG)
    v_clik = pinv(J) @ (CFG.lambda_ca * np.array([err, err]))
    out = nsb_step(p1, p2, 0.0, 0.0, PathErrors(0.0, 0.0), 50.0, 3.0, CFG, True)
    # vessel 1 sits at smaller x: must be pushed toward -x, vessel 2 toward +x
    assert v_clik[0] < 0.0 and v_clik[2] > 0.0
    assert out.v_nsb_1[0] < 0.0 and out.v_nsb_2[0] > 0.0
    # the along-line component of the composed velocity equals the CLIK one
    assert out.v_nsb_1[0] == pytest.approx(v_clik[0])
    assert out.v_nsb_2[0] == pytest.approx(v_clik[2])


# ---------------------------------------------------------------------------
# formation task
# ---------------------------------------------------------------------------

def test_formation_identity_rotation():
    _, sigma_f_d, _, _, _ = formation_task((0, 10), (0, -10), 0.0, CFG)
    assert np.allclose(sigma_f_d, [0.0, 20.0])


def test_formation_quarter_turn_rotation():
    _, sigma_f_d, _, _, _ = formation_task((0, 10), (0, -10), math.pi / 2, CFG)
    assert np.allclose(sigma_f_d, [-20.0, 0.0], atol=1e-12)


def test_formation_error_example():
    sigma_f, sigma_f_d, _, _, _ = formation_task((0, 10), (0, -10), 0.0, CFG)
    err = sigma_f_d - sigma_f
    assert np.allclose(err, [0.0, 10.0])


def test_formation_gain_stays_positive_definite():
    for gamma in np.linspace(-math.pi, math.pi, 25):
        _, _, _, Lam, _ = formation_task((3, 4), (0, 0), gamma, CFG)
        eig = np.linalg.eigvalsh(Lam)
        assert eig.min() > 0.0
        assert np.allclose(sorted(eig), sorted(CFG.lambda_f_p))


def test_formation_jacobian_structure():
    _, _, J, _, _ = formation_task((1, 2), (3, 4), 0.3, CFG)
    assert np.allclose(J, [[0.5, 0, -0.5, 0], [0, 0.5, 0, -0.5]])


# ---------------------------------------------------------------------------
# LOS course and lookahead
# ---------------------------------------------------------------------------

def test_los_zero_error_collapse():
    errs = PathErrors(0.0, 0.0)
    assert lookahead(errs, 50.0) == pytest.approx(math.sqrt(50.0))
    assert los_course(errs, 0.7, 50.0) == pytest.approx(0.7)


def test_los_correction_angle_identity():
    # the correction is exactly -atan(y/Delta); note y = Delta itself is
    # unreachable here because Delta^2 = mu + x^2 + y^2 > y^2 for mu > 0,
    # so the pi/4 case is checked against a forced unit ratio instead
    mu, x = 50.0, 10.0
    y = math.sqrt(mu + x * x)
    errs = PathErrors(x, y)
    d = lookahead(errs, mu)
    assert los_course(errs, 0.0, mu) == pytest.approx(-math.atan(y / d))
    assert -math.atan(1.0) == pytest.approx(-math.pi / 4)


def test_los_worked_example():
    errs = PathErrors(30.0, -40.0)
    d = lookahead(errs, 50.0)
    assert d == pytest.approx(math.sqrt(2550.0))
    assert los_course(errs, 0.0, 50.0) == pytest.approx(-math.atan(-40.0 / math.sqrt(2550.0)))
    assert los_course(errs, 0.0, 50.0) == pytest.approx(0.669926, abs=1e-4)


@given(st.floats(-500, 500), st.floats(-500, 500).filter(lambda y: abs(y) > 1e-9))
def test_los_steers_toward_path(x, y):
    gamma = 0.9
    chi = los_course(PathErrors(x, y), gamma, 50.0)
    assert math.copysign(1.0, chi - gamma) == -math.copysign(1.0, y)


def test_barycenter_velocity():
    assert barycenter_task_velocity(0.0, 3.0) == pytest.approx((3.0, 0.0))
    assert barycenter_task_velocity(math.pi, 3.0)[0] == pytest.approx(-3.0)
    rng = np.random.default_rng(1)
    for chi in rng.uniform(-math.pi, math.pi, 100):
        vx, vy = barycenter_task_velocity(chi, 3.0)
        assert math.hypot(vx, vy) == pytest.approx(3.0, abs=1e-12)


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_compose_passthrough_when_higher_tasks_inactive():
    v3 = np.array([1.0, 2.0, 1.0, 2.0])
    out = compose([(None, None), (None, None), (v3, None)])
    assert np.allclose(out, v3)


def test_formation_projector_preserves_stacked_barycenter_velocity():
    _, _, J, _, _ = formation_task((0, 10), (0, -10), 0.0, CFG)
    N = np.eye(4) - pinv(J) @ J
    for v in ([1.0, -2.0], [0.3, 0.0], [5.0, 5.0]):
        stacked = np.array([v[0], v[1], v[0], v[1]])
        assert np.allclose(N @ stacked, stacked, atol=1e-12)
    # and annihilates anything the formation task already commands
    x = np.array([0.2, -0.7, 1.4, 0.9])
    assert np.abs(J @ (N @ x)).max() < 1e-12


def test_compose_matches_exact_rational_arithmetic():
    # 3-4-5 geometry keeps every entry rational, so the chain can be
    # reproduced in Fraction arithmetic with hand-built pseudoinverses
    p1, p2 = (0.0, 0.0), (9.0, 12.0)  # distance 15, inside sigma_ca_d = 20
    nx, ny = Fraction(-3, 5), Fraction(-4, 5)

    def P(n):
        # I - n n^T on one vessel block
        return [
            [1 - n[0] * n[0], -n[0] * n[1]],
            [-n[0] * n[1], 1 - n[1] * n[1]],
        ]

    v3 = (Fraction(3, 2), Fraction(-5, 7))
    w = (Fraction(1, 3), Fraction(2, 9))  # formation CLIK velocity, vessel 1
    esc = Fraction(5, 1)  # lambda_ca * sigma_err = 1 * (20 - 15)

    def matvec(M, v):
        return (M[0][0] * v[0] + M[0][1] * v[1], M[1][0] * v[0] + M[1][1] * v[1])

    Pn = P((nx, ny))
    lower1 = (w[0] + v3[0], w[1] + v3[1])
    lower2 = (-w[0] + v3[0], -w[1] + v3[1])
    exact1 = tuple(esc * n + q for n, q in zip((nx, ny), matvec(Pn, lower1)))
    exact2 = tuple(-esc * n + q for n, q in zip((nx, ny), matvec(Pn, lower2)))

    sigma, J_ca, err = collision_avoidance_task(p1, p2, CFG)
    v_d1 = pinv(J_ca) @ (CFG.lambda_ca * np.array([err, err]))
    _, _, J_f, _, _ = formation_task(p1, p2, 0.0, CFG)
    v_d2 = np.array([w[0], w[1], -w[0], -w[1]], dtype=float)
    v_d3 = np.array([v3[0], v3[1], v3[0], v3[1]], dtype=float)
    out = compose([(v_d1, J_ca), (v_d2, J_f), (v_d3, None)])

    expected = np.array([float(exact1[0]), float(exact1[1]), float(exact2[0]), float(exact2[1])])
    assert np.abs(out - expected).max() < 1e-12


def test_closed_form_step_matches_general_compose():
    rng = np.random.default_rng(5)
    for _ in range(200):
        p1 = tuple(rng.uniform(-50, 50, 2))
        p2 = tuple(p1 + rng.uniform(5, 40) * np.array(
            [math.cos(a := rng.uniform(-math.pi, math.pi)), math.sin(a)]))
        gamma = rng.uniform(-math.pi, math.pi)
        errs = PathErrors(rng.uniform(-30, 30), rng.uniform(-30, 30))
        U_d3 = rng.uniform(0.5, 5.0)
        sigma, J_ca, err = collision_avoidance_task(p1, p2, CFG)
        active = update_ca_activation(sigma, False, CFG)
        out = nsb_step(p1, p2, gamma, 0.0, errs, 50.0, U_d3, CFG, active)

        sigma_f, sigma_f_d, J_f, Lam, d_dot = formation_task(p1, p2, gamma, CFG)
        v_d2 = pinv(J_f) @ (d_dot + Lam @ (sigma_f_d - sigma_f))
        v3 = barycenter_task_velocity(los_course(errs, gamma, 50.0), U_d3)
        v_d3 = np.array([v3[0], v3[1], v3[0], v3[1]])
        tasks = [
            (pinv(J_ca) @ (CFG.lambda_ca * np.array([err, err])), J_ca) if active else (None, None),
            (v_d2, J_f),
            (v_d3, None),
        ]
        general = compose(tasks)
        got = np.array([*out.v_nsb_1, *out.v_nsb_2])
        assert np.abs(got - general).max() < 1e-10


def test_priority_preservation():
    # adding lower-priority velocities never changes the top task velocity
    rng = np.random.default_rng(6)
    for _ in range(100):
        p1 = tuple(rng.uniform(-20, 20, 2))
        ang = rng.uniform(-math.pi, math.pi)
        p2 = tuple(np.array(p1) + rng.uniform(2, 19) * np.array([math.cos(ang), math.sin(ang)]))
        sigma, J_ca, err = collision_avoidance_task(p1, p2, CFG)
        v_d1 = pinv(J_ca) @ (CFG.lambda_ca * np.array([err, err]))
        lower = rng.normal(size=4)
        v_nsb = v_d1 + (np.eye(4) - pinv(J_ca) @ J_ca) @ lower
        assert np.abs(J_ca @ v_nsb - J_ca @ v_d1).max() < 1e-10


# ---------------------------------------------------------------------------
# reference decomposition
# ---------------------------------------------------------------------------

def test_decompose_aligned_course():
    u_d, psi_d, U, chi = decompose_refs((2.0, 0.0), 0.0, 0.0, 0.0)
    assert u_d == pytest.approx(2.0)
    assert psi_d == pytest.approx(0.0)


def test_decompose_back_facing():
    u_d, psi_d, U, chi = decompose_refs((-2.0, 0.0), 0.0, 0.5, 0.123)
    assert u_d == pytest.approx(0.0, abs=1e-12)
    assert psi_d == 0.123  # held: sideslip undefined at u_d = 0


def test_decompose_zero_sideslip():
    _, psi_d, _, chi = decompose_refs((1.0, 1.0), math.pi / 4, 0.0, 0.0)
    assert psi_d == pytest.approx(chi) == pytest.approx(math.pi / 4)


def test_decompose_degenerate_reference():
    with pytest.raises(DegenerateReference):
        decompose_refs((1e-9, 0.0), 0.0, 0.0, 0.0)


def test_decompose_sideslip_compensation():
    v = 0.4
    u_d, psi_d, U, chi = decompose_refs((3.0, 0.0), 0.0, v, 0.0)
    assert psi_d == pytest.approx(-math.atan(v / u_d))


# ---------------------------------------------------------------------------
# desired yaw rate
# ---------------------------------------------------------------------------

def test_yaw_rate_zero_on_straight_nominal():
    r_d = desired_yaw_rate(
        PathErrors(0.0, 0.0), 50.0, gamma_rate=0.0, x_pb_dot=0.0, y_pb_dot=0.0,
        u_d=3.0, u_d_dot=0.0, v_sway=0.0, v_sway_dot=0.0,
    )
    assert r_d == 0.0


def test_yaw_rate_zero_error_curved_feedforward():
    # in perfect tracking with zero sway the reference reduces to the
    # tangent-angle rate (constant-curvature consistency)
    for gamma_rate in (-0.05, 0.0, 0.02):
        r_d = desired_yaw_rate(
            PathErrors(0.0, 0.0), 50.0, gamma_rate, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0
        )
        assert r_d == gamma_rate


def test_yaw_rate_degenerate():
    with pytest.raises(DegenerateReference):
        desired_yaw_rate(PathErrors(0, 0), 50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_yaw_rate_matches_fd_of_heading_formula():
    # differentiate psi_d = gamma - atan(y/Delta) - atan(v/u_d) numerically
    # along a synthetic smooth trajectory of its inputs
    rng = np.random.default_rng(9)
    mu = 50.0

    def signals(t):
        gamma = 0.3 * math.sin(0.1 * t)
        x = 5.0 * math.cos(0.2 * t)
        y = 8.0 * math.sin(0.15 * t)
        u_d = 3.0 + 0.2 * math.sin(0.05 * t)
        v = 0.5 * math.sin(0.12 * t)
        return gamma, x, y, u_d, v

    def psi_d(t):
        gamma, x, y, u_d, v = signals(t)
        delta = math.sqrt(mu + x * x + y * y)
        return gamma - math.atan(y / delta) - math.atan(v / u_d)

    for t in rng.uniform(0.0, 50.0, 40):
        h = 1e-5
        fd = (psi_d(t + h) - psi_d(t - h)) / (2 * h)
        gamma, x, y, u_d, v = signals(t)
        gamma_rate = 0.03 * math.cos(0.1 * t)
        x_dot = -1.0 * math.sin(0.2 * t)
        y_dot = 1.2 * math.cos(0.15 * t)
        u_d_dot = 0.01 * math.cos(0.05 * t)
        v_dot = 0.06 * math.cos(0.12 * t)
        r_d = desired_yaw_rate(PathErrors(x, y), mu, gamma_rate, x_dot, y_dot,
                               u_d, u_d_dot, v, v_dot)
        assert r_d == pytest.approx(fd, abs=1e-8)


# ---------------------------------------------------------------------------
# interconnection term
# ---------------------------------------------------------------------------

def test_g1_zero_at_zero_errors():
    for y in (-20.0, 0.0, 35.0):
        delta = math.sqrt(50.0 + y * y)
        assert g1(0.0, 0.0, 0.8, 3.0, 0.0, 0.0, -0.4, 2.5, 0.2, y, delta) == 0.0


def test_g2_taylor_in_heading_error():
    # first order in psi_err: G2 ~ U_d cos(atan(y/Delta)) psi_err
    y, delta, U_d = 10.0, math.sqrt(150.0), 3.0
    for psi_err in (1e-4, -1e-4, 5e-4):
        got = g2(psi_err, 0.0, 0.7, 0.2, U_d, y, delta)
        lin = U_d * math.cos(math.atan(y / delta)) * psi_err
        assert got == pytest.approx(lin, rel=1e-3)


def test_g1_linear_growth_bound_sampling():
    # fit a growth constant on one sample set, validate on a fresh one
    def sample(rng, n):
        ratios = []
        for _ in range(n):
            psi_e1, psi_e2 = rng.uniform(-math.pi, math.pi, 2)
            u_e1, u_e2 = rng.uniform(-2, 2, 2)
            tilde = math.sqrt(psi_e1 ** 2 + u_e1 ** 2 + psi_e2 ** 2 + u_e2 ** 2)
            if tilde < 1e-6:
                continue
            psi1, psi2 = rng.uniform(-math.pi, math.pi, 2)
            U1, U2 = rng.uniform(0, 5, 2)
            y = rng.uniform(-100, 100)
            delta = math.sqrt(50.0 + rng.uniform(0, 100) ** 2 + y ** 2)
            val = abs(g1(psi_e1, u_e1, psi1, U1, psi_e2, u_e2, psi2, U2, 0.3, y, delta))
            ratios.append(val / tilde)
        return np.array(ratios)

    fit = sample(np.random.default_rng(100), 10000).max()
    fresh = sample(np.random.default_rng(200), 10000)
    assert np.isfinite(fit) and fit > 0.0
    assert fresh.max() <= 1.2 * fit


def test_nominal_cross_track_contraction():
    # with G1 = 0 and x = 0, plugging the LOS course into the cross-track
    # dynamics gives y_dot * y < 0
    for y in (-40.0, -1.0, 0.5, 30.0):
        errs = PathErrors(0.0, y)
        delta = lookahead(errs, 50.0)
        U_sum = 6.0
        y_dot = -0.5 * U_sum * y / math.sqrt(delta ** 2 + y ** 2)
        assert y_dot * y < 0.0
