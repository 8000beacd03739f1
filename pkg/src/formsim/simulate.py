"""Fixed-step closed-loop simulation of the two-vessel formation system.

One derivative evaluation walks the full pipeline in order: path errors ->
path-variable rate -> task velocities -> per-vessel references -> desired
yaw rate -> autopilots -> plant dynamics.  Guidance and control are
evaluated inside every integrator stage (continuous-control idealization);
discrete decisions (collision-avoidance activation, course hold at low
speed, sensor noise) are frozen over each step so the integrator sees a
smooth right-hand side.

The integration state is a flat list of floats:

    per vessel (16): x, y, psi, u, v, r, theta_hat_u[5], theta_hat_r[5]
    [32]  theta          path variable
    [33]  z_ud_1, [34] z_rd_1, [35] z_ud_2, [36] z_rd_2   derivative filters
    [37]  surge-error integrals (baseline mode), [38] second vessel
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autopilots import AutopilotGains, BaselineGains, switch
from .errors import DegenerateReference, FormsimError, InsufficientDecay
from .nsb import TaskConfig, g1, nsb_step, update_ca_activation
from .paths import PathErrors, f_theta, initial_theta, path_errors
from .vessel import (
    OceanCurrent,
    VesselParams,
    _dot5,
    phi_r,
    phi_u,
    theta_vector,
    validate_params,
    wrap_angle,
    x_coeff,
    y_coeff,
)

__all__ = [
    "InitialSpec",
    "SimConfig",
    "SimLog",
    "ConditionReport",
    "Metrics",
    "rk4_step",
    "closed_loop_derivative",
    "run",
    "check_conditions",
    "lyapunov_diag",
    "metrics",
]

_IDX_THETA = 32
_IDX_FILTER = 33
_IDX_INT = 37
_STATE_DIM = 39


@dataclass(frozen=True)
class InitialSpec:
    """Initial placement relative to the path-start frame, vessels at rest."""

    theta_start: float = 0.0
    cross_track_offset: float = 20.0
    along_track_offset: float = 0.0
    formation_offset: float = 10.0   # vessel 1 at +offset along the frame normal
    vessels: tuple | None = None     # explicit ((x,y,psi,u,v,r), (x,y,psi,u,v,r))
    theta0: float | None = None      # skip the nearest-point search when set


@dataclass(frozen=True)
class SimConfig:
    vessel: VesselParams
    path: object
    dt: float = 0.01
    t_end: float = 600.0
    current: OceanCurrent = OceanCurrent(0.0, 0.0)
    v_max: float = 1.0
    task: TaskConfig = TaskConfig()
    gains: AutopilotGains = AutopilotGains()
    baseline: BaselineGains = BaselineGains()
    autopilot_mode: str = "adaptive"
    k_theta: float = 1.0
    mu: float = 50.0
    u_d: float = 3.0
    vdot_mode: str = "truth"
    sensor_noise_std: float = 0.0
    seed: int = 0
    deriv_filter_tau: float = 0.1
    u_d_dot_max: float = 0.5
    initial: InitialSpec = InitialSpec()
    name: str = "unnamed"

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValueError("dt must lie in (0, 0.1]")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.mu <= 0.0 or self.k_theta <= 0.0 or self.u_d <= 0.0:
            raise ValueError("mu, k_theta and u_d must be positive")
        if self.autopilot_mode not in ("adaptive", "baseline"):
            raise ValueError("autopilot_mode must be 'adaptive' or 'baseline'")
        if self.vdot_mode not in ("truth", "sensor"):
            raise ValueError("vdot_mode must be 'truth' or 'sensor'")
        if self.current.magnitude >= self.v_max:
            raise ValueError("current magnitude must stay below v_max")


class _StepContext:
    """Discrete decisions frozen over each integration step."""

    __slots__ = ("chi_hold", "psi_d_hold", "ca_active", "noise", "clamp_count")

    def __init__(self, psi0_1: float, psi0_2: float):
        self.chi_hold = [psi0_1, psi0_2]
        self.psi_d_hold = [psi0_1, psi0_2]
        self.ca_active = False
        self.noise = (0.0, 0.0)
        self.clamp_count = 0


# ---------------------------------------------------------------------------
# generic RK4
# ---------------------------------------------------------------------------

def rk4_step(f, t: float, y, dt: float):
    """One classical Runge-Kutta step for a list-valued state."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, [yi + 0.5 * dt * ki for yi, ki in zip(y, k1)])
    k3 = f(t + 0.5 * dt, [yi + 0.5 * dt * ki for yi, ki in zip(y, k2)])
    k4 = f(t + dt, [yi + dt * ki for yi, ki in zip(y, k3)])
    h6 = dt / 6.0
    return [
        yi + h6 * (a + 2.0 * (b + c) + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    ]


# ---------------------------------------------------------------------------
# closed-loop right-hand side
# ---------------------------------------------------------------------------

def _course(psi: float, u: float, v: float, hold: float) -> float:
    if u * u + v * v < 1e-6:
        return hold
    c, s = math.cos(psi), math.sin(psi)
    return math.atan2(s * u + c * v, c * u - s * v)


def closed_loop_derivative(t, y, cfg: SimConfig, ctx: _StepContext, want_diag=False):
    """Full pipeline evaluation; returns (dy, diag or None)."""
    p = cfg.vessel
    path = cfg.path
    cur = cfg.current

    x1, y1, psi1, u1, v1, r1 = y[0:6]
    x2, y2, psi2, u2, v2, r2 = y[16:22]
    theta = y[_IDX_THETA]
    th_clamped = min(max(theta, path.theta_min), path.theta_max)
    if th_clamped != theta:
        ctx.clamp_count += 1
        theta = th_clamped

    # --- path frame and barycenter errors
    pbx, pby = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
    gamma = path.tangent_angle(theta)
    errs = path_errors(path, theta, (pbx, pby))

    # --- path-variable update law
    chi_1 = _course(psi1, u1, v1, ctx.chi_hold[0])
    chi_2 = _course(psi2, u2, v2, ctx.chi_hold[1])
    U1 = math.hypot(u1, v1)
    U2 = math.hypot(u2, v2)
    advance = (
        0.5 * U1 * math.cos(chi_1 - gamma)
        + 0.5 * U2 * math.cos(chi_2 - gamma)
        + cfg.k_theta * f_theta(errs.x_pb, errs.y_pb)
    )
    theta_rate = advance / path.speed(theta)
    gamma_rate = path.tangent_rate(theta) * theta_rate

    # --- task velocities (collision avoidance -> formation -> barycenter LOS)
    U_d3 = math.hypot(cfg.u_d, 0.5 * (v1 + v2))
    out = nsb_step(
        (x1, y1), (x2, y2), gamma, gamma_rate, errs, cfg.mu, U_d3, cfg.task, ctx.ca_active
    )

    # --- per-vessel references
    dy = [0.0] * _STATE_DIM
    tau_f = cfg.deriv_filter_tau
    uc1 = math.cos(psi1) * cur.Vx + math.sin(psi1) * cur.Vy
    vc1 = -math.sin(psi1) * cur.Vx + math.cos(psi1) * cur.Vy
    uc2 = math.cos(psi2) * cur.Vx + math.sin(psi2) * cur.Vy
    vc2 = -math.sin(psi2) * cur.Vx + math.cos(psi2) * cur.Vy
    theta_c = theta_vector(cur)

    # kinematic error rates shared by both vessels' yaw-rate references
    x_pb_dot = (
        0.5 * U1 * math.cos(chi_1 - gamma)
        + 0.5 * U2 * math.cos(chi_2 - gamma)
        - path.speed(theta) * theta_rate
        + gamma_rate * errs.y_pb
    )
    y_pb_dot = (
        0.5 * U1 * math.sin(chi_1 - gamma)
        + 0.5 * U2 * math.sin(chi_2 - gamma)
        - gamma_rate * errs.x_pb
    )

    diag_vessels = []
    for i, (base, psi, u, v, r, chi, uc, vc, v_nsb) in enumerate(
        (
            (0, psi1, u1, v1, r1, chi_1, uc1, vc1, out.v_nsb_1),
            (16, psi2, u2, v2, r2, chi_2, uc2, vc2, out.v_nsb_2),
        )
    ):
        try:
            u_d, psi_d, _, _ = _decompose(v_nsb, chi, v, ctx.psi_d_hold[i])
        except DegenerateReference:
            u_d, psi_d = 0.0, ctx.psi_d_hold[i]

        z_ud = y[_IDX_FILTER + 2 * i]
        z_rd = y[_IDX_FILTER + 2 * i + 1]
        # filtered surge-reference rate, slew-limited: it only feeds the
        # surge feedforward, and the raw NSB u_d can jump during transients
        u_d_dot = max(-cfg.u_d_dot_max, min(cfg.u_d_dot_max, (u_d - z_ud) / tau_f))

        # sway acceleration: model value, optionally relabeled as a noisy
        # measured channel (identical expression, different data path)
        v_dot_model = x_coeff(u, uc, p) * r + y_coeff(u, uc, p) * (v - vc)
        v_dot_used = v_dot_model if cfg.vdot_mode == "truth" else v_dot_model + ctx.noise[i]

        # desired yaw rate for the barycenter-following task: the sideslip
        # term is evaluated at the constant configured surge speed (whose
        # rate is zero), which also keeps the denominator away from zero
        delta = out.delta
        d2 = delta * delta + errs.y_pb ** 2
        los_rate = (
            delta * y_pb_dot
            - errs.y_pb * ((errs.x_pb * x_pb_dot + errs.y_pb * y_pb_dot) / delta)
        ) / d2
        denom = cfg.u_d * cfg.u_d + v * v
        beta_rate = v_dot_used * cfg.u_d / denom
        r_d = gamma_rate - beta_rate - los_rate

        psi_dd = (r_d - z_rd) / tau_f

        # control laws inlined with one shared regressor evaluation; the
        # composition-oracle test pins this block to the autopilots module
        ph_u = phi_u(psi, r, u, p)
        ph_r = phi_r(u, v, r, psi, p)
        fr = _f_r_fast(u, v, r, p)
        g = cfg.gains
        psi_err = wrap_angle(psi - psi_d)
        psi_err_rate = r - r_d
        surf = psi_err_rate + g.lam * psi_err
        u_err = u - u_d
        if cfg.autopilot_mode == "adaptive":
            th_u = y[base + 6:base + 11]
            th_r = y[base + 11:base + 16]
            tau_u = (
                -(p.m22 * v + p.m23 * r) * r / p.m11
                + p.d11 * u_d / p.m11
                - _dot5(ph_u, th_u)
                + u_d_dot
                + p.d11_q * u * u / p.m11
                - g.k_u * u_err
                - g.k_e * switch(u_err, g)
            )
            tau_r = (
                -fr
                - _dot5(ph_r, th_r)
                + psi_dd
                - (g.k_psi + g.lam * g.k_r) * psi_err
                - (g.k_r + g.lam) * psi_err_rate
                - g.k_d * switch(surf, g)
            )
            su = g.gamma_u * u_err
            sr = g.gamma_r * surf
            du_hat = (su * ph_u[0], su * ph_u[1], su * ph_u[2], su * ph_u[3], su * ph_u[4])
            dr_hat = (sr * ph_r[0], sr * ph_r[1], sr * ph_r[2], sr * ph_r[3], sr * ph_r[4])
            d_int = 0.0
        else:
            b = cfg.baseline
            tau_u = -b.kp_u * u_err - b.ki_u * y[_IDX_INT + i]
            tau_r = -b.kp_psi * psi_err - b.kd_psi * r
            du_hat = dr_hat = (0.0,) * 5
            cap = b.integral_limit / max(b.ki_u, 1e-12)
            ival = y[_IDX_INT + i]
            if (ival >= cap and u_err > 0.0) or (ival <= -cap and u_err < 0.0):
                d_int = 0.0
            else:
                d_int = u_err
        c, s = math.cos(psi), math.sin(psi)
        dy[base + 0] = c * u - s * v
        dy[base + 1] = s * u + c * v
        dy[base + 2] = r
        dy[base + 3] = (
            -(p.d11 + p.d11_q * u) * u / p.m11
            + (p.m22 * v + p.m23 * r) * r / p.m11
            + _dot5(ph_u, theta_c)
            + tau_u
        )
        dy[base + 4] = v_dot_model
        dy[base + 5] = fr + _dot5(ph_r, theta_c) + tau_r
        for k in range(5):
            dy[base + 6 + k] = du_hat[k]
            dy[base + 11 + k] = dr_hat[k]
        dy[_IDX_FILTER + 2 * i] = (u_d - z_ud) / tau_f
        dy[_IDX_FILTER + 2 * i + 1] = (r_d - z_rd) / tau_f
        dy[_IDX_INT + i] = d_int

        if want_diag:
            diag_vessels.append(
                {
                    "u_d": u_d,
                    "psi_d": psi_d,
                    "r_d": r_d,
                    "tau_u": tau_u,
                    "tau_r": tau_r,
                    "u_err": u_err,
                    "psi_err": psi_err,
                    "s_surf": surf,
                    "U_d": math.hypot(u_d, v),
                    "v_dot": v_dot_used,
                    "chi": chi,
                }
            )

    dy[_IDX_THETA] = theta_rate

    diag = None
    if want_diag:
        d1, d2v = diag_vessels
        G1 = g1(
            d1["psi_err"], d1["u_err"], psi1, d1["U_d"],
            d2v["psi_err"], d2v["u_err"], psi2, d2v["U_d"],
            gamma, errs.y_pb, out.delta,
        )
        diag = {
            "theta": theta,
            "theta_dot": theta_rate,
            "gamma_p": gamma,
            "x_pb": errs.x_pb,
            "y_pb": errs.y_pb,
            "chi_bd": out.chi_bd,
            "delta": out.delta,
            "sigma_ca": out.sigma_ca,
            "ca_active": 1.0 if ctx.ca_active else 0.0,
            "sigma_f_err_x": out.sigma_f_err[0],
            "sigma_f_err_y": out.sigma_f_err[1],
            "V_lyap": 0.5 * (errs.x_pb ** 2 + errs.y_pb ** 2),
            "G1": G1,
            "vessels": diag_vessels,
        }
    return dy, diag


def _decompose(v_nsb, chi, v_sway, psi_d_prev):
    U_nsb = math.hypot(v_nsb[0], v_nsb[1])
    if U_nsb < 1e-6:
        raise DegenerateReference("zero desired velocity")
    chi_nsb = math.atan2(v_nsb[1], v_nsb[0])
    u_d = U_nsb * (1.0 + math.cos(wrap_angle(chi_nsb - chi))) / 2.0
    psi_d = psi_d_prev if u_d < 1e-9 else chi_nsb - math.atan(v_sway / u_d)
    return u_d, psi_d, U_nsb, chi_nsb


def _f_r_fast(u, v, r, p):
    g = p.gamma
    return (
        p.m23 * (p.m11 * u * r + p.d22 * v + p.d23 * r)
        + p.m22 * (-(p.m22 * v + p.m23 * r) * u + p.m11 * u * v - p.d32 * v - p.d33 * r)
    ) / g


# ---------------------------------------------------------------------------
# feasibility conditions and Lyapunov diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    kappa_max: float
    y_min: float
    x_max: float
    ratio: float
    kappa_ok: bool
    mu_bound: float
    mu: float
    mu_ok: bool
    params_ok: bool
    violations: tuple

    @property
    def ok(self) -> bool:
        return self.kappa_ok and self.mu_ok and self.params_ok

    def as_dict(self) -> dict:
        return {
            "kappa_max": self.kappa_max,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "ratio": self.ratio,
            "kappa_ok": self.kappa_ok,
            "mu_bound": self.mu_bound,
            "mu": self.mu,
            "mu_ok": self.mu_ok,
            "params_ok": self.params_ok,
            "violations": list(self.violations),
        }


def check_conditions(cfg: SimConfig) -> ConditionReport:
    """Evaluate the curvature and lookahead feasibility inequalities."""
    rep = validate_params(cfg.vessel, cfg.u_d, cfg.v_max)
    kappa_max = cfg.path.kappa_max()
    kappa_ok = kappa_max < rep.ratio
    denom = rep.y_min - rep.x_max * kappa_max
    mu_bound = 4.0 * rep.x_max / denom if denom > 0.0 else math.inf
    return ConditionReport(
        kappa_max=kappa_max,
        y_min=rep.y_min,
        x_max=rep.x_max,
        ratio=rep.ratio,
        kappa_ok=kappa_ok,
        mu_bound=mu_bound,
        mu=cfg.mu,
        mu_ok=cfg.mu > mu_bound,
        params_ok=rep.ok,
        violations=rep.violations,
    )


def lyapunov_diag(errs: PathErrors, U_d1: float, U_d2: float, k_theta: float,
                  mu: float, ball_radius: float) -> dict:
    """Quadratic error energy, its nominal rate, and the contraction floor."""
    x, yy = errs.x_pb, errs.y_pb
    V = 0.5 * (x * x + yy * yy)
    V_dot = -(
        k_theta * x * x / math.sqrt(1.0 + x * x)
        + 0.5 * (U_d1 + U_d2) * yy * yy / math.sqrt(mu + x * x + 2.0 * yy * yy)
    )
    r = ball_radius
    q_min = min(
        k_theta / math.sqrt(1.0 + r * r),
        0.5 * (U_d1 + U_d2) / math.sqrt(mu + 3.0 * r * r),
    )
    return {"V": V, "V_dot_nominal": V_dot, "q_min": q_min}


# ---------------------------------------------------------------------------
# simulation driver and log
# ---------------------------------------------------------------------------

_VESSEL_COLS = ("x", "y", "psi", "u", "v", "r", "u_d", "psi_d", "r_d", "tau_u",
                "tau_r", "u_err", "psi_err", "s_surf", "U_d", "v_dot", "chi",
                "th_u_norm", "th_r_norm")
_SHARED_COLS = ("t", "theta", "theta_dot", "gamma_p", "x_pb", "y_pb", "chi_bd",
                "delta", "sigma_ca", "ca_active", "sigma_f_err_x", "sigma_f_err_y",
                "V_lyap", "G1")
COLUMNS = list(_SHARED_COLS) + [f"{c}_1" for c in _VESSEL_COLS] + [f"{c}_2" for c in _VESSEL_COLS]


class SimLog:
    """Column-oriented record of one run, one row per integration step."""

    def __init__(self):
        self._data = {c: [] for c in COLUMNS}
        self.completed = False
        self.failure = None
        self.theta_clamped = 0
        self.config_name = ""

    def append(self, t, y, diag):
        d = self._data
        d["t"].append(t)
        for c in _SHARED_COLS[1:]:
            d[c].append(diag[c])
        for i, suffix in enumerate(("_1", "_2")):
            base = 16 * i
            vd = diag["vessels"][i]
            d["x" + suffix].append(y[base + 0])
            d["y" + suffix].append(y[base + 1])
            d["psi" + suffix].append(y[base + 2])
            d["u" + suffix].append(y[base + 3])
            d["v" + suffix].append(y[base + 4])
            d["r" + suffix].append(y[base + 5])
            for c in ("u_d", "psi_d", "r_d", "tau_u", "tau_r", "u_err", "psi_err",
                      "s_surf", "U_d", "v_dot", "chi"):
                d[c + suffix].append(vd[c])
            d["th_u_norm" + suffix].append(math.sqrt(sum(q * q for q in y[base + 6:base + 11])))
            d["th_r_norm" + suffix].append(math.sqrt(sum(q * q for q in y[base + 11:base + 16])))

    def finalize(self):
        self.arrays = {c: np.asarray(v) for c, v in self._data.items()}

    def __getitem__(self, col: str) -> np.ndarray:
        return self.arrays[col]

    def __len__(self) -> int:
        return len(self.arrays["t"])

    def to_csv(self, fh) -> None:
        """Fixed column order, floats at 9 significant digits."""
        fh.write(",".join(COLUMNS) + "\n")
        cols = [self.arrays[c] for c in COLUMNS]
        for k in range(len(self)):
            fh.write(",".join("%.9g" % col[k] for col in cols) + "\n")


def _initial_state(cfg: SimConfig):
    path = cfg.path
    init = cfg.initial
    if init.vessels is not None:
        (s1, s2) = init.vessels
        p_b = (0.5 * (s1[0] + s2[0]), 0.5 * (s1[1] + s2[1]))
        theta0 = initial_theta(path, p_b) if init.theta0 is None else init.theta0
    else:
        th = init.theta_start
        gx, gy = path.point(th)
        gamma = path.tangent_angle(th)
        tx, ty = math.cos(gamma), math.sin(gamma)
        nx, ny = -ty, tx
        pbx = gx + init.along_track_offset * tx + init.cross_track_offset * nx
        pby = gy + init.along_track_offset * ty + init.cross_track_offset * ny
        s1 = (pbx + init.formation_offset * nx, pby + init.formation_offset * ny, gamma, 0.0, 0.0, 0.0)
        s2 = (pbx - init.formation_offset * nx, pby - init.formation_offset * ny, gamma, 0.0, 0.0, 0.0)
        theta0 = initial_theta(path, (pbx, pby)) if init.theta0 is None else init.theta0

    y = [0.0] * _STATE_DIM
    y[0:6] = [float(q) for q in s1]
    y[16:22] = [float(q) for q in s2]
    y[_IDX_THETA] = theta0

    ctx = _StepContext(y[2], y[18])
    d0 = math.hypot(y[0] - y[16], y[1] - y[17])
    ctx.ca_active = update_ca_activation(d0, False, cfg.task)
    # two-pass filter warm start so the derivative estimates begin at zero:
    # first pin z_ud at u_d(t0), then pin z_rd at the resulting r_d(t0)
    _, diag = closed_loop_derivative(0.0, y, cfg, ctx, want_diag=True)
    y[_IDX_FILTER + 0] = diag["vessels"][0]["u_d"]
    y[_IDX_FILTER + 2] = diag["vessels"][1]["u_d"]
    _, diag = closed_loop_derivative(0.0, y, cfg, ctx, want_diag=True)
    y[_IDX_FILTER + 1] = diag["vessels"][0]["r_d"]
    y[_IDX_FILTER + 3] = diag["vessels"][1]["r_d"]
    return y, ctx


def run(cfg: SimConfig, force: bool = False) -> SimLog:
    """Integrate the closed loop over [0, t_end]; deterministic given cfg.

    Unless `force`, the feasibility conditions must pass first.  On a
    non-finite state the run halts and returns the partial log with
    `completed=False` and the failure recorded.
    """
    report = check_conditions(cfg)
    if not (report.ok or force):
        raise ValueError(
            f"feasibility conditions fail: kappa_ok={report.kappa_ok} "
            f"mu_ok={report.mu_ok} params_ok={report.params_ok}; use force to override"
        )

    rng = np.random.default_rng(cfg.seed)
    y, ctx = _initial_state(cfg)
    n_steps = int(round(cfg.t_end / cfg.dt))
    dt = cfg.dt
    log = SimLog()
    log.config_name = cfg.name

    for k in range(n_steps + 1):
        t = k * dt
        # step-boundary evaluation: refresh discrete context, then log
        if cfg.vdot_mode == "sensor" and cfg.sensor_noise_std > 0.0:
            ctx.noise = tuple(cfg.sensor_noise_std * rng.standard_normal(2))
        else:
            ctx.noise = (0.0, 0.0)
        try:
            k1, diag = closed_loop_derivative(t, y, cfg, ctx, want_diag=True)
        except (OverflowError, ValueError, FormsimError) as exc:
            log.failure = f"derivative failed at t={t:.3f}: {exc}"
            log.finalize()
            return log
        if not all(math.isfinite(q) for q in k1):
            log.failure = f"non-finite derivative at t={t:.3f}"
            log.finalize()
            return log
        sp1 = math.hypot(y[3], y[4])
        sp2 = math.hypot(y[19], y[20])
        if sp1 >= 1e-3:
            ctx.chi_hold[0] = diag["vessels"][0]["chi"]
        if sp2 >= 1e-3:
            ctx.chi_hold[1] = diag["vessels"][1]["chi"]
        ctx.psi_d_hold[0] = diag["vessels"][0]["psi_d"]
        ctx.psi_d_hold[1] = diag["vessels"][1]["psi_d"]
        ctx.ca_active = update_ca_activation(diag["sigma_ca"], ctx.ca_active, cfg.task)
        log.append(t, y, diag)
        if k == n_steps:
            break

        half = 0.5 * dt
        try:
            k2, _ = closed_loop_derivative(
                t + half, [yi + half * ki for yi, ki in zip(y, k1)], cfg, ctx)
            k3, _ = closed_loop_derivative(
                t + half, [yi + half * ki for yi, ki in zip(y, k2)], cfg, ctx)
            k4, _ = closed_loop_derivative(
                t + dt, [yi + dt * ki for yi, ki in zip(y, k3)], cfg, ctx)
        except (OverflowError, ValueError, FormsimError) as exc:
            log.failure = f"derivative failed inside step at t={t:.3f}: {exc}"
            log.finalize()
            return log
        h6 = dt / 6.0
        y = [
            yi + h6 * (a + 2.0 * (b + c) + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
        ]
        if not all(math.isfinite(q) for q in y):
            log.failure = f"non-finite state after t={t:.3f}"
            log.finalize()
            return log

    log.completed = True
    log.theta_clamped = ctx.clamp_count
    log.finalize()
    return log


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    convergence_time: float | None
    exp_rate_fit: float
    max_sway: float
    formation_rms: float
    crosstrack_rms: float

    def as_dict(self) -> dict:
        return {
            "convergence_time": self.convergence_time,
            "exp_rate_fit": self.exp_rate_fit,
            "max_sway": self.max_sway,
            "formation_rms": self.formation_rms,
            "crosstrack_rms": self.crosstrack_rms,
        }


def fit_decay_rate(t: np.ndarray, err: np.ndarray, upper: float = 2.0,
                   lower: float = 0.05, min_span: float = 5.0,
                   min_drop: float = 5.0) -> float:
    """Least-squares slope of log(err) over its decay window.

    The window opens when the error first drops below `upper` and closes
    when it first reaches `lower` (or at the subsequent minimum if it never
    does), so every run is fitted over the same error band regardless of its
    initial offset.  The window must span at least `min_span` seconds and a
    factor `min_drop` of decay, else InsufficientDecay is raised.
    """
    if len(t) < 3:
        raise InsufficientDecay("log too short")
    below = np.nonzero(err <= upper)[0]
    if len(below) == 0:
        raise InsufficientDecay(f"error never drops below {upper}")
    i0 = int(below[0])
    tail = err[i0:]
    reached = np.nonzero(tail <= lower)[0]
    j_end = i0 + (int(reached[0]) if len(reached) else int(np.argmin(tail)))
    if j_end <= i0:
        raise InsufficientDecay("no decay after window opens")
    if t[j_end] - t[i0] < min_span:
        raise InsufficientDecay("decay window shorter than the minimum span")
    e0 = max(err[i0], 1e-12)
    e1 = max(err[j_end], 1e-12)
    if e0 / e1 < min_drop:
        raise InsufficientDecay("decay factor too small for a rate fit")
    window = np.maximum(err[i0:j_end + 1], 1e-12)
    return float(np.polyfit(t[i0:j_end + 1], np.log(window), 1)[0])


def metrics(log: SimLog, steady_fraction: float = 0.4,
            convergence_threshold: float = 0.5, rate_required: bool = True) -> Metrics:
    """Convergence and steady-state summary of one run.

    Raises InsufficientDecay when no rate window exists, unless
    `rate_required` is False (then exp_rate_fit comes back as nan).
    """
    if len(log) == 0:
        raise ValueError("empty log")
    t = log["t"]
    err = np.hypot(log["x_pb"], log["y_pb"])

    conv_time = None
    exceed = np.nonzero(err >= convergence_threshold)[0]
    if len(exceed) == 0:
        conv_time = float(t[0])
    elif exceed[-1] + 1 < len(t):
        conv_time = float(t[exceed[-1] + 1])

    try:
        rate = fit_decay_rate(t, err)
    except InsufficientDecay:
        if rate_required:
            raise
        rate = math.nan
    n_steady = max(1, int(len(t) * steady_fraction))
    sl = slice(len(t) - n_steady, None)
    formation = np.hypot(log["sigma_f_err_x"][sl], log["sigma_f_err_y"][sl])
    return Metrics(
        convergence_time=conv_time,
        exp_rate_fit=rate,
        max_sway=float(max(np.abs(log["v_1"]).max(), np.abs(log["v_2"]).max())),
        formation_rms=float(np.sqrt(np.mean(formation ** 2))),
        crosstrack_rms=float(np.sqrt(np.mean(log["y_pb"][sl] ** 2))),
    )
