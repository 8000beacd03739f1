"""Surge and heading autopilots.

The primary controllers feedback-linearize the surge and yaw channels,
adapt a 5-parameter current model per channel, and add a sliding-mode term
on s = psi_err_rate + lam * psi_err (heading) and on the surge error.  A
PI surge / PD heading pair is available as the non-adaptive baseline.

The discontinuous switching term defaults to a boundary-layer form
sat(s/eps); with a fixed-step integrator the strict sign function produces
chattering, so strict mode is reserved for fidelity studies at small steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vessel import (
    ControlInput,
    VesselParams,
    VesselState,
    _dot5,
    f_r,
    phi_r,
    phi_u,
    wrap_angle,
)

__all__ = [
    "AutopilotGains",
    "BaselineGains",
    "AdaptiveState",
    "AutopilotRefs",
    "switch",
    "heading_control",
    "heading_adapt",
    "surge_control",
    "surge_adapt",
    "baseline_control",
]


@dataclass(frozen=True)
class AutopilotGains:
    """Gains of the adaptive controllers; all positive."""

    k_psi: float = 1.2
    k_r: float = 1.3
    lam: float = 100.0
    k_d: float = 10.0
    gamma_r: float = 5.0
    k_u: float = 0.1
    k_e: float = 0.1
    gamma_u: float = 1.0
    sign_eps: float = 0.1   # boundary-layer half width; 0 or strict_sign for true sign
    strict_sign: bool = False

    def __post_init__(self):
        for name in ("k_psi", "k_r", "lam", "k_d", "gamma_r", "k_u", "k_e", "gamma_u"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"autopilot gain {name} must be positive")


@dataclass(frozen=True)
class BaselineGains:
    """PI surge / PD heading gains (no feedforward, no adaptation)."""

    kp_u: float = 1.0
    ki_u: float = 0.1
    kp_psi: float = 2.0
    kd_psi: float = 5.0
    integral_limit: float = 2.0


@dataclass
class AdaptiveState:
    """Current-model estimates for one vessel, zero-initialized."""

    theta_hat_u: np.ndarray = field(default_factory=lambda: np.zeros(5))
    theta_hat_r: np.ndarray = field(default_factory=lambda: np.zeros(5))


@dataclass(frozen=True)
class AutopilotRefs:
    """Desired surge / heading and their derivatives (psi_d unwrapped)."""

    u_d: float
    u_d_dot: float
    psi_d: float
    psi_d_dot: float
    psi_d_ddot: float


def switch(x: float, gains: AutopilotGains) -> float:
    """Signum, or its boundary-layer regularization sat(x/eps)."""
    if gains.strict_sign or gains.sign_eps <= 0.0:
        return float((x > 0.0) - (x < 0.0))
    return max(-1.0, min(1.0, x / gains.sign_eps))


def _heading_errors(s: VesselState, refs: AutopilotRefs, lam: float):
    psi_err = wrap_angle(s.psi - refs.psi_d)
    psi_err_rate = s.r - refs.psi_d_dot
    return psi_err, psi_err_rate, psi_err_rate + lam * psi_err


def heading_control(
    s: VesselState,
    refs: AutopilotRefs,
    gains: AutopilotGains,
    ad: AdaptiveState,
    p: VesselParams,
) -> float:
    """Yaw command: cancel model terms, PD on the heading error, switch on s."""
    psi_err, psi_err_rate, surf = _heading_errors(s, refs, gains.lam)
    return (
        -f_r(s.u, s.v, s.r, p)
        - _dot5(phi_r(s.u, s.v, s.r, s.psi, p), ad.theta_hat_r)
        + refs.psi_d_ddot
        - (gains.k_psi + gains.lam * gains.k_r) * psi_err
        - (gains.k_r + gains.lam) * psi_err_rate
        - gains.k_d * switch(surf, gains)
    )


def heading_adapt(
    s: VesselState, refs: AutopilotRefs, gains: AutopilotGains, p: VesselParams
) -> tuple[float, ...]:
    """Adaptation rate gamma_r * phi_r * s for the yaw current model."""
    _, _, surf = _heading_errors(s, refs, gains.lam)
    scale = gains.gamma_r * surf
    return tuple(scale * w for w in phi_r(s.u, s.v, s.r, s.psi, p))


def surge_control(
    s: VesselState,
    refs: AutopilotRefs,
    gains: AutopilotGains,
    ad: AdaptiveState,
    p: VesselParams,
) -> float:
    """Surge command: feedback linearization plus P and switching terms."""
    u_err = s.u - refs.u_d
    return (
        -(p.m22 * s.v + p.m23 * s.r) * s.r / p.m11
        + p.d11 * refs.u_d / p.m11
        - _dot5(phi_u(s.psi, s.r, s.u, p), ad.theta_hat_u)
        + refs.u_d_dot
        + p.d11_q * s.u ** 2 / p.m11
        - gains.k_u * u_err
        - gains.k_e * switch(u_err, gains)
    )


def surge_adapt(
    s: VesselState, refs: AutopilotRefs, gains: AutopilotGains, p: VesselParams
) -> tuple[float, ...]:
    """Adaptation rate gamma_u * phi_u * u_err for the surge current model."""
    u_err = s.u - refs.u_d
    scale = gains.gamma_u * u_err
    return tuple(scale * w for w in phi_u(s.psi, s.r, s.u, p))


def baseline_control(
    s: VesselState,
    refs: AutopilotRefs,
    gains: BaselineGains,
    integral_u: float,
) -> ControlInput:
    """PI on the surge error, PD on the heading error.

    The derivative term damps the measured yaw rate (stock heading
    autopilots have no access to the guidance reference rate), so turning
    and current leave a lag this controller cannot remove.  `integral_u` is
    the accumulated surge error, owned and clamped by the caller
    (anti-windup).
    """
    u_err = s.u - refs.u_d
    psi_err = wrap_angle(s.psi - refs.psi_d)
    tau_u = -gains.kp_u * u_err - gains.ki_u * integral_u
    tau_r = -gains.kp_psi * psi_err - gains.kd_psi * s.r
    return ControlInput(tau_u=tau_u, tau_r=tau_r)
