"""Parametrized planar paths, the path-tangential frame and frame kinematics.

Each path maps a scalar parameter theta to a point, tangent angle gamma(theta)
and signed geometric curvature kappa(theta).  `speed(theta)` is the parametric
speed |p'(theta)|; for unit-speed kinds (straight, circle, fillet polyline)
it is identically 1, while the sinusoid kind is parametrized by its x
coordinate and has speed sqrt(1 + y'(theta)^2).

The frame-advance law converts the commanded tangential advance rate into a
theta rate by dividing by the parametric speed, so along-track cancellation
is exact for every kind (the printed update law assumes unit speed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import OutOfRange

__all__ = [
    "PathErrors",
    "StraightPath",
    "SinusoidPath",
    "CirclePath",
    "FilletPolylinePath",
    "make_path",
    "path_errors",
    "f_theta",
    "theta_dot",
    "initial_theta",
    "kappa_max_sampled",
]


@dataclass(frozen=True)
class PathErrors:
    """Barycenter position expressed in the path-tangential frame."""

    x_pb: float  # along-track error, m
    y_pb: float  # cross-track error, m

    @property
    def norm(self) -> float:
        return math.hypot(self.x_pb, self.y_pb)


def _check_theta(theta: float) -> None:
    if not math.isfinite(theta):
        raise OutOfRange(f"path parameter must be finite, got {theta!r}")


class StraightPath:
    """Ray from `origin` in direction `heading`, parametrized by arc length."""

    kind = "straight"

    def __init__(self, origin=(0.0, 0.0), heading: float = 0.0,
                 theta_min: float = -1e4, theta_max: float = 1e4):
        self.origin = (float(origin[0]), float(origin[1]))
        self.heading = float(heading)
        self.theta_min = float(theta_min)
        self.theta_max = float(theta_max)
        self._c = math.cos(self.heading)
        self._s = math.sin(self.heading)

    def point(self, theta: float) -> tuple[float, float]:
        _check_theta(theta)
        return (self.origin[0] + theta * self._c, self.origin[1] + theta * self._s)

    def tangent_angle(self, theta: float) -> float:
        _check_theta(theta)
        return self.heading

    def curvature(self, theta: float) -> float:
        _check_theta(theta)
        return 0.0

    def speed(self, theta: float) -> float:
        return 1.0

    def tangent_rate(self, theta: float) -> float:
        return 0.0

    def kappa_max(self) -> float:
        return 0.0


class SinusoidPath:
    """x = theta, y = amplitude * sin(omega * theta)."""

    kind = "sinusoid"

    def __init__(self, amplitude: float, omega: float,
                 theta_min: float = -1e4, theta_max: float = 1e4):
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.theta_min = float(theta_min)
        self.theta_max = float(theta_max)

    def point(self, theta: float) -> tuple[float, float]:
        _check_theta(theta)
        return (theta, self.amplitude * math.sin(self.omega * theta))

    def _slope(self, theta: float) -> float:
        return self.amplitude * self.omega * math.cos(self.omega * theta)

    def tangent_angle(self, theta: float) -> float:
        _check_theta(theta)
        return math.atan(self._slope(theta))

    def curvature(self, theta: float) -> float:
        _check_theta(theta)
        ypp = -self.amplitude * self.omega ** 2 * math.sin(self.omega * theta)
        return ypp / (1.0 + self._slope(theta) ** 2) ** 1.5

    def speed(self, theta: float) -> float:
        return math.hypot(1.0, self._slope(theta))

    def tangent_rate(self, theta: float) -> float:
        ypp = -self.amplitude * self.omega ** 2 * math.sin(self.omega * theta)
        return ypp / (1.0 + self._slope(theta) ** 2)

    def kappa_max(self) -> float:
        # attained at the crests, where y' = 0
        return abs(self.amplitude) * self.omega ** 2


class CirclePath:
    """Circle of radius R, counterclockwise, parametrized by arc length."""

    kind = "circle"

    def __init__(self, radius: float, center=(0.0, 0.0), start_angle: float = -math.pi / 2,
                 theta_min: float = 0.0, theta_max: float | None = None):
        if radius <= 0.0:
            raise ValueError("circle radius must be positive")
        self.radius = float(radius)
        self.center = (float(center[0]), float(center[1]))
        self.start_angle = float(start_angle)
        self.theta_min = float(theta_min)
        self.theta_max = float(theta_max if theta_max is not None else 2 * math.pi * radius)

    def _ang(self, theta: float) -> float:
        return self.start_angle + theta / self.radius

    def point(self, theta: float) -> tuple[float, float]:
        _check_theta(theta)
        a = self._ang(theta)
        return (self.center[0] + self.radius * math.cos(a),
                self.center[1] + self.radius * math.sin(a))

    def tangent_angle(self, theta: float) -> float:
        _check_theta(theta)
        return self._ang(theta) + math.pi / 2

    def curvature(self, theta: float) -> float:
        _check_theta(theta)
        return 1.0 / self.radius

    def speed(self, theta: float) -> float:
        return 1.0

    def tangent_rate(self, theta: float) -> float:
        return 1.0 / self.radius

    def kappa_max(self) -> float:
        return 1.0 / self.radius


class FilletPolylinePath:
    """Waypoint polyline with circular fillets at the corners.

    Arc-length parametrized; straight before the first and after the last
    waypoint (linear extrapolation).  Curvature steps between 0 and
    +-1/fillet_radius at segment joints, so the path is C1 with bounded
    curvature rather than C2.
    """

    kind = "fillet-polyline"

    def __init__(self, waypoints, fillet_radius: float):
        if len(waypoints) < 2:
            raise ValueError("need at least two waypoints")
        if fillet_radius <= 0.0:
            raise ValueError("fillet radius must be positive")
        self.waypoints = [(float(x), float(y)) for x, y in waypoints]
        self.fillet_radius = float(fillet_radius)
        self._segments = self._build()
        self.theta_min = 0.0
        self.theta_max = sum(s["length"] for s in self._segments)

    def _build(self):
        wps = [np.array(w) for w in self.waypoints]
        R = self.fillet_radius
        segs = []
        cursor = wps[0]
        for i in range(1, len(wps) - 1):
            a, b, c = cursor, wps[i], wps[i + 1]
            d1 = b - a
            d2 = c - b
            l1, l2 = np.linalg.norm(d1), np.linalg.norm(d2)
            d1, d2 = d1 / l1, d2 / l2
            turn = math.atan2(d1[0] * d2[1] - d1[1] * d2[0], float(d1 @ d2))
            if abs(turn) < 1e-12:
                continue
            t = R * math.tan(abs(turn) / 2.0)
            if t > l1 - 1e-9 or t > np.linalg.norm(wps[i + 1] - b) - 1e-9:
                raise ValueError(f"fillet radius too large at waypoint {i}")
            p1 = b - d1 * t
            p2 = b + d2 * t
            segs.append({"type": "line", "start": cursor, "dir": d1,
                         "length": float(np.linalg.norm(p1 - cursor))})
            side = 1.0 if turn > 0 else -1.0
            n1 = side * np.array([-d1[1], d1[0]])
            center = p1 + R * n1
            a0 = math.atan2(p1[1] - center[1], p1[0] - center[0])
            segs.append({"type": "arc", "center": center, "radius": R, "a0": a0,
                         "sweep_sign": side, "length": R * abs(turn)})
            cursor = p2
        d = wps[-1] - cursor
        l = float(np.linalg.norm(d))
        segs.append({"type": "line", "start": cursor, "dir": d / l, "length": l})
        return segs

    def _locate(self, theta: float):
        s = theta
        for seg in self._segments:
            if s <= seg["length"] or seg is self._segments[-1]:
                return seg, s
            s -= seg["length"]
        return self._segments[-1], s

    def _eval(self, theta: float):
        # allow extrapolation beyond both ends along the end tangents
        seg, s = self._locate(max(theta, 0.0)) if theta >= 0.0 else (self._segments[0], theta)
        if seg["type"] == "line":
            p = seg["start"] + s * seg["dir"]
            gamma = math.atan2(seg["dir"][1], seg["dir"][0])
            return float(p[0]), float(p[1]), gamma, 0.0
        ang = seg["a0"] + seg["sweep_sign"] * s / seg["radius"]
        p = seg["center"] + seg["radius"] * np.array([math.cos(ang), math.sin(ang)])
        gamma = ang + seg["sweep_sign"] * math.pi / 2.0
        return float(p[0]), float(p[1]), gamma, seg["sweep_sign"] / seg["radius"]

    def point(self, theta: float) -> tuple[float, float]:
        _check_theta(theta)
        x, y, _, _ = self._eval(theta)
        return (x, y)

    def tangent_angle(self, theta: float) -> float:
        _check_theta(theta)
        return self._eval(theta)[2]

    def curvature(self, theta: float) -> float:
        _check_theta(theta)
        return self._eval(theta)[3]

    def speed(self, theta: float) -> float:
        return 1.0

    def tangent_rate(self, theta: float) -> float:
        return self.curvature(theta)

    def kappa_max(self) -> float:
        if any(s["type"] == "arc" for s in self._segments):
            return 1.0 / self.fillet_radius
        return 0.0


def make_path(spec: dict):
    """Build a path from its scenario-JSON description."""
    kind = spec.get("kind")
    args = {k: v for k, v in spec.items() if k != "kind"}
    table = {
        "straight": StraightPath,
        "sinusoid": SinusoidPath,
        "circle": CirclePath,
        "fillet-polyline": FilletPolylinePath,
    }
    if kind not in table:
        raise ValueError(f"unknown path kind {kind!r}")
    return table[kind](**args)


def path_errors(path, theta: float, p_b) -> PathErrors:
    """Along/cross-track errors: R(gamma)^T (p_b - p_path(theta))."""
    px, py = path.point(theta)
    gamma = path.tangent_angle(theta)
    dx, dy = p_b[0] - px, p_b[1] - py
    c, s = math.cos(gamma), math.sin(gamma)
    return PathErrors(c * dx + s * dy, -s * dx + c * dy)


def f_theta(x_pb: float, y_pb: float = 0.0) -> float:
    """Saturating along-track feedback x/sqrt(1+x^2); odd, |f| < 1, f*x > 0."""
    return x_pb / math.sqrt(1.0 + x_pb * x_pb)


def theta_dot(path, theta: float, errs: PathErrors, U1: float, chi1: float,
              U2: float, chi2: float, k_theta: float) -> float:
    """Path-variable update law.

    The numerator is the commanded advance of the frame along the tangent
    (mean projected vessel speed plus the along-track stabilizing term);
    dividing by |p'(theta)| converts it to a theta rate so that the
    along-track dynamics reduce to x' = -k_theta f_theta + gamma_rate * y.
    """
    gamma = path.tangent_angle(theta)
    advance = (
        0.5 * U1 * math.cos(chi1 - gamma)
        + 0.5 * U2 * math.cos(chi2 - gamma)
        + k_theta * f_theta(errs.x_pb, errs.y_pb)
    )
    return advance / path.speed(theta)


def initial_theta(path, p_b, coarse_step: float = 1.0) -> float:
    """Coarse global search + local refinement of the closest path point."""
    grid = np.arange(path.theta_min, path.theta_max + coarse_step, coarse_step)
    d2 = np.array([(path.point(t)[0] - p_b[0]) ** 2 + (path.point(t)[1] - p_b[1]) ** 2
                   for t in grid])
    k = int(np.argmin(d2))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if hi <= lo:
        return float(grid[k])
    res = minimize_scalar(
        lambda t: (path.point(t)[0] - p_b[0]) ** 2 + (path.point(t)[1] - p_b[1]) ** 2,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-9},
    )
    return float(res.x)


def kappa_max_sampled(path, dtheta: float = 0.1, refine: int = 2) -> float:
    """Dense-sampling curvature bound with local refinement (cross-check)."""
    grid = np.arange(path.theta_min, path.theta_max + dtheta, dtheta)
    kappas = np.array([abs(path.curvature(float(t))) for t in grid])
    k = int(np.argmax(kappas))
    best = float(kappas[k])
    center, step = float(grid[k]), dtheta
    for _ in range(refine):
        step /= 50.0
        local = np.arange(center - 50 * step, center + 50 * step, step)
        vals = [abs(path.curvature(float(t))) for t in local]
        j = int(np.argmax(vals))
        best = max(best, vals[j])
        center = float(local[j])
    return best
