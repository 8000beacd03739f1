"""Prioritized-task guidance for the two-vessel formation.

Three tasks, highest priority first: keep the vessels apart (activated only
below a distance threshold), hold the formation vector, and steer the
barycenter along the path with a line-of-sight course.  Task velocities are
combined by projecting each lower-priority solution into the null space of
the tasks above it; the combined per-vessel velocity is then decomposed
into surge and heading references with sideslip compensation.

Stacked configuration convention: p = [p1; p2] in R^4, task Jacobians are
m x 4, task velocities live in R^4.  The barycenter task velocity is applied
identically to both vessels ([v; v]), which the formation null-space
projector leaves untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, DegenerateReference
from .paths import PathErrors
from .vessel import wrap_angle

__all__ = [
    "TaskConfig",
    "NsbOutput",
    "pinv",
    "collision_avoidance_task",
    "formation_task",
    "los_course",
    "lookahead",
    "barycenter_task_velocity",
    "compose",
    "decompose_refs",
    "desired_yaw_rate",
    "g2",
    "g1",
    "nsb_step",
]


@dataclass(frozen=True)
class TaskConfig:
    """Task activation distances, desired formation and CLIK gains."""

    sigma_ca_d: float = 20.0          # m, collision-avoidance activation distance
    lambda_ca: float = 1.0            # 1/s
    sigma_f_d_p: tuple = (0.0, 20.0)  # m, desired formation vector, path frame
    lambda_f_p: tuple = (2.5, 0.3)    # 1/s, diagonal formation gain, path frame
    ca_hysteresis: float = 0.5        # m, deactivation band above sigma_ca_d
    formation_feedforward: bool = False  # include d/dt of the rotated target

    def __post_init__(self):
        if self.sigma_ca_d <= 0.0:
            raise ValueError("sigma_ca_d must be positive")
        if self.lambda_ca <= 0.0 or min(self.lambda_f_p) <= 0.0:
            raise ValueError("task gains must be positive")


@dataclass
class NsbOutput:
    """Per-vessel desired velocities plus diagnostics for the log."""

    v_nsb_1: tuple
    v_nsb_2: tuple
    chi_bd: float
    delta: float
    sigma_ca: float
    sigma_ca_err: float
    ca_active: bool
    sigma_f_err: tuple


def pinv(J: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse with singular-value thresholding."""
    return np.linalg.pinv(np.asarray(J, dtype=float), rcond=rcond)


def collision_avoidance_task(p1, p2, cfg: TaskConfig):
    """Distance task, one row per vessel against the other as obstacle.

    Returns (sigma, J, sigma_err) with J in R^{2x4}; desired task rate is
    zero, so the CLIK velocity is J^+ (lambda_ca * sigma_err).
    """
    dx, dy = p1[0] - p2[0], p1[1] - p2[1]
    sigma = math.hypot(dx, dy)
    if sigma < 1e-6:
        raise DegenerateGeometry("vessels coincide; collision-avoidance task undefined")
    nx, ny = dx / sigma, dy / sigma
    J = np.array([[nx, ny, 0.0, 0.0], [0.0, 0.0, -nx, -ny]])
    return sigma, J, cfg.sigma_ca_d - sigma


def formation_task(p1, p2, gamma_p: float, cfg: TaskConfig, gamma_rate: float = 0.0):
    """Vector formation task sigma_f = p1 - p_b = (p1 - p2)/2.

    The desired value and the diagonal gain are specified in the path frame
    and rotated to the inertial frame with R(gamma_p); the gain transforms by
    congruence so it stays positive definite.  Returns
    (sigma_f, sigma_f_d, J, Lambda, sigma_f_d_dot).
    """
    c, s = math.cos(gamma_p), math.sin(gamma_p)
    R = np.array([[c, -s], [s, c]])
    sigma_f = np.array([0.5 * (p1[0] - p2[0]), 0.5 * (p1[1] - p2[1])])
    sigma_f_d = R @ np.asarray(cfg.sigma_f_d_p, dtype=float)
    Lam = R @ np.diag(cfg.lambda_f_p) @ R.T
    J = np.array([[0.5, 0.0, -0.5, 0.0], [0.0, 0.5, 0.0, -0.5]])
    if cfg.formation_feedforward:
        d_dot = gamma_rate * np.array([-sigma_f_d[1], sigma_f_d[0]])
    else:
        d_dot = np.zeros(2)
    return sigma_f, sigma_f_d, J, Lam, d_dot


def lookahead(errs: PathErrors, mu: float) -> float:
    """Lookahead distance sqrt(mu + x^2 + y^2); grows with the total error."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    return math.sqrt(mu + errs.x_pb ** 2 + errs.y_pb ** 2)


def los_course(errs: PathErrors, gamma_p: float, mu: float) -> float:
    """Line-of-sight course for the barycenter."""
    return gamma_p - math.atan(errs.y_pb / lookahead(errs, mu))


def barycenter_task_velocity(chi_bd: float, U_d: float) -> tuple[float, float]:
    """Desired barycenter velocity U_d [cos chi, sin chi]."""
    if U_d <= 0.0:
        raise ValueError("desired speed must be positive")
    return (U_d * math.cos(chi_bd), U_d * math.sin(chi_bd))


def compose(tasks) -> np.ndarray:
    """Null-space composition v = v1 + N1 (v2 + N2 v3) over stacked R^4.

    `tasks` is a priority-ordered list of (v_d, J) pairs; inactive tasks are
    (zero-velocity, None) and contribute an identity projector.
    """
    v_out = np.zeros(4)
    for v_d, J in reversed(tasks):
        v_d = np.zeros(4) if v_d is None else np.asarray(v_d, dtype=float)
        if J is None:
            v_out = v_d + v_out
        else:
            J = np.asarray(J, dtype=float)
            N = np.eye(4) - pinv(J) @ J
            v_out = v_d + N @ v_out
    return v_out


def decompose_refs(v_nsb, chi: float, v_sway: float, psi_d_prev: float):
    """Split a desired inertial velocity into surge and heading references.

    u_d = U (1 + cos(chi_nsb - chi)) / 2 and psi_d = chi_nsb - atan(v/u_d)
    (sideslip compensation).  Raises DegenerateReference when the desired
    speed vanishes; the caller holds psi_d_prev and commands u_d = 0.
    """
    U_nsb = math.hypot(v_nsb[0], v_nsb[1])
    if U_nsb < 1e-6:
        raise DegenerateReference("desired velocity too small to define a course")
    chi_nsb = math.atan2(v_nsb[1], v_nsb[0])
    u_d = U_nsb * (1.0 + math.cos(wrap_angle(chi_nsb - chi))) / 2.0
    if u_d < 1e-9:
        psi_d = psi_d_prev
    else:
        psi_d = chi_nsb - math.atan(v_sway / u_d)
    return u_d, psi_d, U_nsb, chi_nsb


def desired_yaw_rate(
    errs: PathErrors,
    mu: float,
    gamma_rate: float,
    x_pb_dot: float,
    y_pb_dot: float,
    u_d: float,
    u_d_dot: float,
    v_sway: float,
    v_sway_dot: float,
) -> float:
    """Analytic rate of the desired heading.

    Three parts: tangent-angle rate feedforward, the rate of the LOS
    correction (driven by the error rates), and the rate of the sideslip
    compensation, which brings in the sway acceleration.  `v_sway_dot` may
    come from the model or from a measured channel; the expression is
    identical either way.
    """
    denom = u_d * u_d + v_sway * v_sway
    if denom < 1e-9:
        raise DegenerateReference("sideslip rate undefined at zero speed")
    delta = lookahead(errs, mu)
    d2 = delta * delta + errs.y_pb ** 2
    los_rate = (
        delta * y_pb_dot
        - errs.y_pb * ((errs.x_pb / delta) * x_pb_dot + (errs.y_pb / delta) * y_pb_dot)
    ) / d2
    beta_rate = (v_sway_dot * u_d - v_sway * u_d_dot) / denom
    return gamma_rate - beta_rate - los_rate


def g2(psi_err: float, u_err: float, psi: float, gamma_p: float,
       U_d: float, y_pb: float, delta: float) -> float:
    """Per-vessel perturbation of the cross-track dynamics."""
    los = math.atan(y_pb / delta)
    return (
        u_err * math.sin(psi - gamma_p)
        + U_d * (1.0 - math.cos(psi_err)) * math.sin(los)
        + U_d * math.cos(los) * math.sin(psi_err)
    )


def g1(psi_err_1, u_err_1, psi_1, U_d_1, psi_err_2, u_err_2, psi_2, U_d_2,
       gamma_p, y_pb, delta) -> float:
    """Total interconnection term: half the sum of the per-vessel parts."""
    return 0.5 * (
        g2(psi_err_1, u_err_1, psi_1, gamma_p, U_d_1, y_pb, delta)
        + g2(psi_err_2, u_err_2, psi_2, gamma_p, U_d_2, y_pb, delta)
    )


def nsb_step(p1, p2, gamma_p: float, gamma_rate: float, errs: PathErrors,
             mu: float, U_d3: float, cfg: TaskConfig, ca_active: bool) -> NsbOutput:
    """One guidance evaluation: task velocities composed in closed form.

    The collision-avoidance rows are orthonormal and the formation Jacobian
    is [I/2, -I/2], so the pseudoinverses and null-space projectors reduce to
    per-vessel 2-vector operations; `compose` reproduces this path on the
    general route and the tests check they agree.  Everything here is scalar
    arithmetic: this sits inside every integrator stage.
    """
    dx, dy = p1[0] - p2[0], p1[1] - p2[1]
    sigma_ca = math.hypot(dx, dy)
    if sigma_ca < 1e-6:
        raise DegenerateGeometry("vessels coincide; collision-avoidance task undefined")
    sigma_ca_err = cfg.sigma_ca_d - sigma_ca

    c, s = math.cos(gamma_p), math.sin(gamma_p)
    fdx, fdy = cfg.sigma_f_d_p
    sd_x = c * fdx - s * fdy          # desired formation vector, inertial
    sd_y = s * fdx + c * fdy
    ex = sd_x - 0.5 * dx              # formation error
    ey = sd_y - 0.5 * dy
    la, lb = cfg.lambda_f_p           # rotated diagonal gain R diag(a,b) R^T
    l11 = la * c * c + lb * s * s
    l22 = la * s * s + lb * c * c
    l12 = (la - lb) * c * s
    wx = l11 * ex + l12 * ey          # vessel-1 formation velocity; vessel 2 gets -w
    wy = l12 * ex + l22 * ey
    if cfg.formation_feedforward:
        wx += -gamma_rate * sd_y
        wy += gamma_rate * sd_x

    delta = math.sqrt(mu + errs.x_pb ** 2 + errs.y_pb ** 2)
    chi_bd = gamma_p - math.atan(errs.y_pb / delta)
    v3x = U_d3 * math.cos(chi_bd)
    v3y = U_d3 * math.sin(chi_bd)

    v1x, v1y = wx + v3x, wy + v3y
    v2x, v2y = -wx + v3x, -wy + v3y

    if ca_active:
        # CLIK escape velocity along the line joining the vessels, plus the
        # lower-priority resultant projected off that line (P = I - n n^T)
        nx = (p1[0] - p2[0]) / sigma_ca
        ny = (p1[1] - p2[1]) / sigma_ca
        esc = cfg.lambda_ca * sigma_ca_err
        dot1 = v1x * nx + v1y * ny
        v1x, v1y = esc * nx + v1x - dot1 * nx, esc * ny + v1y - dot1 * ny
        dot2 = v2x * nx + v2y * ny
        v2x, v2y = -esc * nx + v2x - dot2 * nx, -esc * ny + v2y - dot2 * ny

    return NsbOutput(
        v_nsb_1=(v1x, v1y),
        v_nsb_2=(v2x, v2y),
        chi_bd=chi_bd,
        delta=delta,
        sigma_ca=sigma_ca,
        sigma_ca_err=sigma_ca_err,
        ca_active=ca_active,
        sigma_f_err=(ex, ey),
    )


def update_ca_activation(sigma_ca: float, active: bool, cfg: TaskConfig) -> bool:
    """Hysteresis band on the activation threshold to avoid chattering."""
    if active:
        return sigma_ca < cfg.sigma_ca_d + cfg.ca_hysteresis
    return sigma_ca < cfg.sigma_ca_d
