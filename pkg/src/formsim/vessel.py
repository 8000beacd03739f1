"""3-DOF underactuated surface-vessel model in component form.

The plant is the standard port/starboard-symmetric surge-sway-yaw model with
added mass, linear(+quadratic surge) damping and a constant irrotational
ocean current.  With the body origin placed so that the input map decouples
sway, the dynamics reduce to six scalar equations driven by the normalized
inputs (tau_u, tau_r):

    x'   = cos(psi) u - sin(psi) v
    y'   = sin(psi) u + cos(psi) v
    psi' = r
    u'   = -(d11 + d11_q u) u / m11 + (m22 v + m23 r) r / m11
           + phi_u(psi, r, u) . theta_c + tau_u
    v'   = X(u, u_c) r + Y(u, u_c) (v - v_c)
    r'   = F_r(u, v, r) + phi_r(u, v, r, psi) . theta_c + tau_r

where (u_c, v_c) is the current seen from the body frame and
theta_c = [Vx, Vy, Vx^2, Vy^2, Vx*Vy] collects the inertial current terms.
All coefficient functions below were obtained by symbolically reducing the
matrix-form model, so `state_derivative` agrees with a matrix assembly of
M, C, D to machine precision (the test suite checks this).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import AssumptionViolated, NonFinite

__all__ = [
    "VesselParams",
    "VesselState",
    "OceanCurrent",
    "ControlInput",
    "ParamsReport",
    "rotation",
    "current_in_body",
    "theta_vector",
    "x_coeff",
    "y_coeff",
    "f_r",
    "phi_u",
    "phi_r",
    "state_derivative",
    "validate_params",
    "wrap_angle",
]


def wrap_angle(a: float) -> float:
    """Wrap an angle difference to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class VesselParams:
    """Rigid-body, added-mass, damping and actuator-map coefficients.

    Units: m**_rb/m**_a in kg, kg*m or kg*m^2 as indexed; d11 in kg/s,
    d11_q in kg/m; d22 kg/s; d23, d32 kg*m/s; d33 kg*m^2/s; b** map the
    physical inputs (thrust N, rudder rad) to generalized forces.
    """

    m11_rb: float
    m22_rb: float
    m23_rb: float
    m33_rb: float
    m11_a: float
    m22_a: float
    m23_a: float
    m33_a: float
    d11: float
    d11_q: float
    d22: float
    d23: float
    d32: float
    d33: float
    b11: float
    b22: float
    b23: float
    # derived totals, filled in __post_init__ (plain attributes: these sit on
    # the innermost simulation loop)
    m11: float = field(init=False, repr=False)
    m22: float = field(init=False, repr=False)
    m23: float = field(init=False, repr=False)
    m33: float = field(init=False, repr=False)
    gamma: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "m11", self.m11_rb + self.m11_a)
        object.__setattr__(self, "m22", self.m22_rb + self.m22_a)
        object.__setattr__(self, "m23", self.m23_rb + self.m23_a)
        object.__setattr__(self, "m33", self.m33_rb + self.m33_a)
        object.__setattr__(self, "gamma", self.m22 * self.m33 - self.m23 ** 2)

    @classmethod
    def from_dict(cls, data: dict) -> "VesselParams":
        names = {f.name for f in fields(cls) if f.init}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown vessel parameter field(s): {sorted(unknown)}")
        missing = names - set(data)
        if missing:
            raise ValueError(f"missing vessel parameter field(s): {sorted(missing)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @classmethod
    def from_json(cls, path: str | Path) -> "VesselParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.init}


@dataclass
class VesselState:
    """Pose (x, y, psi) and body velocities (u, v, r) of one vessel.

    psi is stored unwrapped; use `wrap_angle` on differences.
    """

    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    v: float = 0.0
    r: float = 0.0


@dataclass(frozen=True)
class OceanCurrent:
    """Constant irrotational current, inertial components in m/s."""

    Vx: float = 0.0
    Vy: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.Vx, self.Vy)


@dataclass(frozen=True)
class ControlInput:
    """Normalized surge/yaw acceleration commands (after the M^-1 B map)."""

    tau_u: float = 0.0
    tau_r: float = 0.0


def rotation(psi: float) -> np.ndarray:
    """Rotation matrix from body to inertial frame about z."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def current_in_body(current: OceanCurrent, psi: float) -> tuple[float, float]:
    """Current components seen from the body frame, R(psi)^T [Vx, Vy]."""
    c, s = math.cos(psi), math.sin(psi)
    return (c * current.Vx + s * current.Vy, -s * current.Vx + c * current.Vy)


def theta_vector(current: OceanCurrent) -> tuple[float, float, float, float, float]:
    """Current regressor target [Vx, Vy, Vx^2, Vy^2, Vx*Vy]."""
    Vx, Vy = current.Vx, current.Vy
    return (Vx, Vy, Vx * Vx, Vy * Vy, Vx * Vy)


def x_coeff(u, u_c, p: VesselParams):
    """Yaw-rate-to-sway-acceleration coefficient X(u, u_c), affine in both.

    Accepts scalars or numpy arrays for u / u_c.
    """
    g = p.gamma
    return (
        p.m23 * p.d33
        - p.m33 * p.d23
        - (p.m11 * p.m33 - p.m23 ** 2) * u
        + p.m33 * (p.m11_a - p.m22_a) * u_c
    ) / g


def y_coeff(u, u_c, p: VesselParams):
    """Sway damping coefficient Y(u, u_c); must stay negative in operation."""
    g = p.gamma
    return (p.m23 * p.d32 - p.m33 * p.d22 + p.m23 * (p.m22_a - p.m11_a) * (u - u_c)) / g


def f_r(u: float, v: float, r: float, p: VesselParams) -> float:
    """Current-free part of the yaw acceleration."""
    g = p.gamma
    return (
        p.m23 * (p.m11 * u * r + p.d22 * v + p.d23 * r)
        + p.m22 * (-(p.m22 * v + p.m23 * r) * u + p.m11 * u * v - p.d32 * v - p.d33 * r)
    ) / g


def phi_u(psi: float, r: float, u: float, p: VesselParams) -> tuple[float, ...]:
    """Surge current regressor; phi_u . theta_vector gives the current terms.

    Depends on u through the quadratic surge damping (the relative-velocity
    expansion brings in 2*d11_q*u), so u is an explicit argument.
    """
    c, s = math.cos(psi), math.sin(psi)
    dl = (p.d11 + 2.0 * p.d11_q * u) / p.m11
    dm = (p.m11_a - p.m22_a) / p.m11
    dq = p.d11_q / p.m11
    return (dl * c - dm * r * s, dl * s + dm * r * c, -dq * c * c, -dq * s * s, -2.0 * dq * c * s)


def phi_r(u: float, v: float, r: float, psi: float, p: VesselParams) -> tuple[float, ...]:
    """Yaw current regressor; phi_r . theta_vector gives the current terms."""
    g = p.gamma
    c, s = math.cos(psi), math.sin(psi)
    a1 = (p.m22_a - p.m11_a) * (p.m22 * v + p.m23 * r) / g
    a2 = (p.m22 * (p.d32 - (p.m11_a - p.m22_a) * u) - p.m23 * p.d22) / g
    w = p.m22 * (p.m11_a - p.m22_a) / g
    return (c * a1 - s * a2, s * a1 + c * a2, -w * c * s, w * c * s, w * (c * c - s * s))


def _dot5(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4]


def state_derivative(
    s: VesselState, inp: ControlInput, current: OceanCurrent, p: VesselParams
) -> VesselState:
    """Time derivative of the six vessel states (returned in state layout)."""
    c, sn = math.cos(s.psi), math.sin(s.psi)
    u_c = c * current.Vx + sn * current.Vy
    v_c = -sn * current.Vx + c * current.Vy
    th = theta_vector(current)

    x_dot = c * s.u - sn * s.v
    y_dot = sn * s.u + c * s.v
    psi_dot = s.r
    u_dot = (
        -(p.d11 + p.d11_q * s.u) * s.u / p.m11
        + (p.m22 * s.v + p.m23 * s.r) * s.r / p.m11
        + _dot5(phi_u(s.psi, s.r, s.u, p), th)
        + inp.tau_u
    )
    v_dot = x_coeff(s.u, u_c, p) * s.r + y_coeff(s.u, u_c, p) * (s.v - v_c)
    r_dot = f_r(s.u, s.v, s.r, p) + _dot5(phi_r(s.u, s.v, s.r, s.psi, p), th) + inp.tau_r

    out = VesselState(x_dot, y_dot, psi_dot, u_dot, v_dot, r_dot)
    for val in (x_dot, y_dot, psi_dot, u_dot, v_dot, r_dot):
        if not math.isfinite(val):
            raise NonFinite(f"non-finite state derivative: {out}")
    return out


@dataclass(frozen=True)
class ParamsReport:
    """Result of `validate_params`."""

    y_min: float
    x_max: float
    ratio: float
    gamma: float
    decoupling_residual: float
    ok: bool
    violations: tuple[str, ...]


def input_decoupling_residual(p: VesselParams) -> float:
    """Relative magnitude of the sway row of M^-1 B (0 for a valid origin)."""
    M = np.array(
        [
            [p.m11, 0.0, 0.0],
            [0.0, p.m22, p.m23],
            [0.0, p.m23, p.m33],
        ]
    )
    B = np.array([[p.b11, 0.0], [0.0, p.b22], [0.0, p.b23]])
    MinvB = np.linalg.solve(M, B)
    scale = np.abs(MinvB).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(MinvB[1]).max() / scale)


def validate_params(
    p: VesselParams,
    u_d: float,
    v_max: float,
    margin: float = 0.0,
    du: float = 1e-3,
    duc: float = 1e-2,
) -> ParamsReport:
    """Check the structural assumptions and extract Y_min, X_max.

    Y_min = min of -Y and X_max = max of |X| over the operating box
    u in [0, u_d + margin], |u_c| <= v_max.  Both functions are affine, so
    the grid (which contains the box corners) is exact; the resolution is
    defensive only.  Never raises; failures are reported by name.
    """
    violations: list[str] = []

    if p.gamma <= 0.0:
        violations.append("gamma: sway-yaw mass sub-block not positive definite")
    for name, (a, b, ab2) in {
        "rigid-body mass": (p.m22_rb, p.m33_rb, p.m23_rb),
        "added mass": (p.m22_a, p.m33_a, p.m23_a),
    }.items():
        if a <= 0.0 or b <= 0.0 or a * b - ab2 ** 2 <= 0.0:
            violations.append(f"{name} matrix not positive definite")
    if p.m11_rb <= 0.0 or p.m11_a < 0.0:
        violations.append("surge mass entries must be positive")
    if abs(p.m11_rb - p.m22_rb) > 1e-9 * max(p.m11_rb, p.m22_rb):
        # A rigid body has equal surge/sway mass; the component form relies on it.
        violations.append("m11_rb != m22_rb: not a rigid-body mass matrix")

    residual = input_decoupling_residual(p)
    if residual >= 1e-8:
        violations.append(f"input map does not decouple sway (residual {residual:.2e})")

    u = np.arange(0.0, u_d + margin + du / 2.0, du)
    uc = np.arange(-v_max, v_max + duc / 2.0, duc)
    U, UC = np.meshgrid(u, uc, indexing="ij")
    x_max = float(np.abs(x_coeff(U, UC, p)).max())
    y_grid = y_coeff(U, UC, p)
    y_min = float(-y_grid.max())
    if y_min <= 0.0:
        violations.append("sway damping assumption violated: Y >= 0 inside operating box")

    ratio = y_min / x_max if x_max > 0.0 else math.inf
    return ParamsReport(
        y_min=y_min,
        x_max=x_max,
        ratio=ratio,
        gamma=p.gamma,
        decoupling_residual=residual,
        ok=not violations,
        violations=tuple(violations),
    )


def assert_sway_damped(p: VesselParams, u_d: float, v_max: float) -> None:
    """Raise AssumptionViolated unless Y < 0 on the whole operating box."""
    report = validate_params(p, u_d, v_max)
    if report.y_min <= 0.0:
        raise AssumptionViolated(
            f"Y(u, u_c) must stay negative on [0, {u_d}] x [-{v_max}, {v_max}]"
        )
