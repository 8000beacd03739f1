import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from formsim.errors import OutOfRange
from formsim.paths import (
    CirclePath,
    FilletPolylinePath,
    PathErrors,
    SinusoidPath,
    StraightPath,
    f_theta,
    initial_theta,
    kappa_max_sampled,
    make_path,
    path_errors,
    theta_dot,
)
from formsim.vessel import wrap_angle


def sin300():
    return SinusoidPath(amplitude=300.0, omega=0.005, theta_min=-200.0, theta_max=3000.0)


ALL_PATHS = [
    StraightPath(heading=0.3),
    sin300(),
    CirclePath(radius=120.0),
    FilletPolylinePath([(0, 0), (500, 0), (500, 400), (1000, 400)], fillet_radius=150.0),
]


# ---------------------------------------------------------------------------
# pointwise geometry
# ---------------------------------------------------------------------------

def test_straight_line_along_x():
    p = StraightPath()
    for theta in (0.0, 10.0, -3.0):
        assert p.tangent_angle(theta) == 0.0
        assert p.curvature(theta) == 0.0
    assert p.point(5.0) == (5.0, 0.0)


def test_sinusoid_crest_curvature_value():
    # crest of the reference sinusoid sits a quarter period in
    p = sin300()
    theta_crest = math.pi / (2 * 0.005)
    assert abs(p.curvature(theta_crest)) == pytest.approx(0.0075, abs=1e-12)
    assert p.kappa_max() == pytest.approx(0.0075, abs=1e-15)


def test_sinusoid_tangent_at_origin():
    # slope at theta=0 is A*omega = 1.5
    assert sin300().tangent_angle(0.0) == pytest.approx(math.atan(1.5), abs=1e-15)


def test_kappa_max_analytic_vs_sampled():
    for path in ALL_PATHS:
        assert kappa_max_sampled(path) == pytest.approx(path.kappa_max(), abs=1e-6)


@pytest.mark.parametrize("path", ALL_PATHS, ids=lambda p: p.kind)
def test_curvature_matches_finite_difference(path):
    # kappa = d gamma / d arclength; joints of the fillet polyline are skipped
    rng = np.random.default_rng(2)
    h = 1e-4
    checked = 0
    for theta in rng.uniform(path.theta_min + 1.0, path.theta_max - 1.0, size=1000):
        k0 = path.curvature(theta - 2 * h)
        k1 = path.curvature(theta + 2 * h)
        if abs(k1 - k0) > 1e-6 * (1 + abs(k0)) and path.kind == "fillet-polyline":
            continue  # curvature step at a joint
        dgamma = wrap_angle(path.tangent_angle(theta + h) - path.tangent_angle(theta - h))
        ds = 2 * h * path.speed(theta)
        assert dgamma / ds == pytest.approx(path.curvature(theta), abs=1e-6)
        checked += 1
    assert checked > 900


@pytest.mark.parametrize("path", ALL_PATHS, ids=lambda p: p.kind)
def test_tangent_matches_point_derivative(path):
    rng = np.random.default_rng(3)
    h = 1e-5
    for theta in rng.uniform(path.theta_min + 1.0, path.theta_max - 1.0, size=200):
        x0, y0 = path.point(theta - h)
        x1, y1 = path.point(theta + h)
        ang = math.atan2(y1 - y0, x1 - x0)
        assert abs(wrap_angle(ang - path.tangent_angle(theta))) < 1e-6
        # parametric speed consistency
        assert math.hypot(x1 - x0, y1 - y0) / (2 * h) == pytest.approx(
            path.speed(theta), rel=1e-6
        )


def test_out_of_range_rejects_non_finite():
    with pytest.raises(OutOfRange):
        sin300().point(math.nan)


def test_make_path_dispatch():
    p = make_path({"kind": "sinusoid", "amplitude": 300, "omega": 0.005})
    assert isinstance(p, SinusoidPath)
    with pytest.raises(ValueError, match="unknown path kind"):
        make_path({"kind": "spiral"})


# ---------------------------------------------------------------------------
# path errors
# ---------------------------------------------------------------------------

def test_errors_zero_on_path():
    for path in ALL_PATHS:
        e = path_errors(path, 37.0, path.point(37.0))
        assert e.x_pb == pytest.approx(0.0, abs=1e-12)
        assert e.y_pb == pytest.approx(0.0, abs=1e-12)


def test_errors_identity_frame_on_straight():
    e = path_errors(StraightPath(), 0.0, (5.0, 3.0))
    assert (e.x_pb, e.y_pb) == pytest.approx((5.0, 3.0))


def test_errors_normal_offset_on_sinusoid():
    path = sin300()
    theta = 100.0
    gamma = path.tangent_angle(theta)
    px, py = path.point(theta)
    # offset 10 m along the frame's +y axis (left of the tangent)
    p_b = (px - 10.0 * math.sin(gamma), py + 10.0 * math.cos(gamma))
    e = path_errors(path, theta, p_b)
    assert e.x_pb == pytest.approx(0.0, abs=1e-9)
    assert e.y_pb == pytest.approx(10.0, abs=1e-9)


# ---------------------------------------------------------------------------
# f_theta and the update law
# ---------------------------------------------------------------------------

def test_f_theta_values():
    assert f_theta(0.0) == 0.0
    assert f_theta(1.0) == pytest.approx(1.0 / math.sqrt(2.0))
    assert f_theta(1000.0) == pytest.approx(1000.0 / math.sqrt(1.0 + 1000.0 ** 2))
    assert f_theta(-1000.0) == -f_theta(1000.0)


@given(st.floats(-1e6, 1e6))
def test_f_theta_properties(x):
    f = f_theta(x)
    assert abs(f) < 1.0
    assert f == -f_theta(-x)
    if x != 0.0:
        assert f != 0.0
        assert math.copysign(1.0, f) == math.copysign(1.0, x)


def test_theta_dot_collapses_to_speed():
    path = StraightPath()
    rate = theta_dot(path, 0.0, PathErrors(0.0, 0.0), 3.0, 0.0, 3.0, 0.0, k_theta=1.0)
    assert rate == pytest.approx(3.0)


def test_theta_dot_pure_feedback_term():
    path = StraightPath()
    rate = theta_dot(path, 0.0, PathErrors(1.0, 0.0), 0.0, 0.0, 0.0, 0.0, k_theta=0.5)
    assert rate == pytest.approx(0.5 / math.sqrt(2.0))


def test_theta_dot_scales_with_parametric_speed():
    path = sin300()
    errs = PathErrors(0.0, 0.0)
    rate = theta_dot(path, 0.0, errs, 3.0, path.tangent_angle(0.0), 3.0,
                     path.tangent_angle(0.0), 1.0)
    assert rate == pytest.approx(3.0 / path.speed(0.0))


def test_along_track_error_dynamics_reproduced():
    # integrate theta for two constant-velocity vessels and check by finite
    # difference that x' = -k_theta f_theta + gamma_rate * y along the run
    path = sin300()
    k_theta = 0.8
    p1 = np.array([40.0, 10.0])
    p2 = np.array([30.0, -25.0])
    vel1 = np.array([2.9, 1.1])
    vel2 = np.array([3.1, 0.7])
    theta = 25.0
    dt = 1e-3
    history = []
    for k in range(4000):
        p_b = 0.5 * (p1 + p2)
        errs = path_errors(path, theta, p_b)
        U1, chi1 = np.hypot(*vel1), math.atan2(vel1[1], vel1[0])
        U2, chi2 = np.hypot(*vel2), math.atan2(vel2[1], vel2[0])
        rate = theta_dot(path, theta, errs, U1, chi1, U2, chi2, k_theta)
        gamma_rate = path.tangent_rate(theta) * rate
        history.append((errs.x_pb, -k_theta * f_theta(errs.x_pb) + gamma_rate * errs.y_pb))
        # RK4 on theta alone (vessel positions advance linearly)
        def fth(th, s):
            pb = 0.5 * (p1 + p2) + 0.5 * (vel1 + vel2) * s
            e = path_errors(path, th, pb)
            return theta_dot(path, th, e, U1, chi1, U2, chi2, k_theta)

        k1 = fth(theta, 0.0)
        k2 = fth(theta + 0.5 * dt * k1, 0.5 * dt)
        k3 = fth(theta + 0.5 * dt * k2, 0.5 * dt)
        k4 = fth(theta + dt * k3, dt)
        theta += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        p1 = p1 + vel1 * dt
        p2 = p2 + vel2 * dt
    x = np.array([h[0] for h in history])
    predicted = np.array([h[1] for h in history])
    fd = np.gradient(x, dt)
    assert np.abs(fd[5:-5] - predicted[5:-5]).max() < 1e-4


def test_along_track_feedback_sign_on_straight():
    # with the curvature term zero, the update law pushes x_pb toward zero
    path = StraightPath()
    for x in (-30.0, -0.5, 0.7, 40.0):
        rate = theta_dot(path, 0.0, PathErrors(x, 5.0), 2.0, 0.0, 2.0, 0.0, 1.0)
        x_dot = 2.0 - rate  # both vessels advance at 2 m/s along the path
        assert math.copysign(1.0, x_dot) == -math.copysign(1.0, x)


# ---------------------------------------------------------------------------
# initial theta search
# ---------------------------------------------------------------------------

def test_initial_theta_on_straight():
    path = StraightPath(theta_min=-100.0, theta_max=100.0)
    assert initial_theta(path, (37.2, 5.0)) == pytest.approx(37.2, abs=1e-6)


def test_initial_theta_on_sinusoid():
    path = sin300()
    theta_true = 412.3
    px, py = path.point(theta_true)
    gamma = path.tangent_angle(theta_true)
    p_b = (px - 8.0 * math.sin(gamma), py + 8.0 * math.cos(gamma))
    found = initial_theta(path, p_b)
    e = path_errors(path, found, p_b)
    assert abs(e.x_pb) < 1e-5
