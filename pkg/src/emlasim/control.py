"""Hierarchical sensorless control on a simulated one-DOF testbed.

The high level runs the manipulator force/velocity sweeps with adaptive
inertial-parameter estimates to produce required actuator force and
velocity for the lift chain; the low level turns those into dq voltage
commands, using either simulated load sensors (MF) or the Kriging
surrogate driven by torque and speed only (SL). The plant is the actuator
simulation loaded by an emulated force profile derived from the lift-joint
statics along the commanded trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import emla, pik, trajectory, vdc

V_SAT = 480.0 * math.sqrt(2.0 / 3.0)  # per-axis voltage ceiling [V]
F_EMULATOR_MAX = 70e3                 # load-emulator force envelope [N]
DIVERGENCE_LIMIT = 0.1                # position error aborting a run [m]
REST_POSTURE = np.array([0.0, 0.0, -1.5, 0.0, 0.0, 0.0])  # lift overwritten


@dataclass
class ControllerGains:
    """High- and low-level gains plus the adaptation setup."""

    K_A: np.ndarray = field(default_factory=lambda: np.diag(
        [2e5, 2e5, 2e5, 2e4, 2e4, 2e4]).astype(float))
    K_i: float = 1.5       # d-axis current gain [V/A]
    K_f: float = 1e-4      # force gain [V/N]
    K_v: float = 150.0     # velocity gain [V/(m/s)]
    gamma: float = 0.0     # adaptation gain (0 disables)
    theta_bounds_scale: float = 0.3  # +- fraction around initial estimates
    lam: float = 2.0       # position-correction gain [1/s]
    deriv_cutoff_hz: float = 100.0   # current-reference differentiation

    def __post_init__(self):
        K = np.asarray(self.K_A, dtype=float)
        if np.any(np.linalg.eigvalsh(0.5 * (K + K.T)) < 0):
            raise ValueError("K_A must be positive semidefinite")
        if self.K_i <= 0 or self.K_f <= 0 or self.K_v <= 0 or self.lam <= 0:
            raise ValueError("gains must be positive")


@dataclass
class TestbedConfig:
    """One closed-loop scenario on the simulated testbed.

    emla_cfg is the nominal actuator model the controller reasons with;
    plant_cfg (defaulting to it) is what is actually simulated, so a
    deliberate mismatch mimics a physical rig.
    """

    emla_cfg: emla.EmlaConfig
    chain: vdc.ChainModel
    payload: float                 # [kg]
    x_target: float                # actuator length goal [m]
    t_end: float                   # trajectory duration [s]
    mode: str = "MF"               # "MF" measured feedback | "SL" sensorless
    gains: ControllerGains = field(default_factory=ControllerGains)
    pik_model: pik.PikModel | None = None
    plant_cfg: emla.EmlaConfig | None = None
    lift_start: float = 0.26       # initial lift angle [rad]
    sensor_noise_F: float = 0.0    # MF force sensor sigma [N]
    sensor_noise_v: float = 0.0    # MF velocity sensor sigma [m/s]
    adaptation: bool = False
    theta0_scale: float = 1.0      # initial estimate = scale * true theta
    unknown_payload: bool = False  # controller starts blind to the payload
    dt: float = emla.DT_DEFAULT

    def __post_init__(self):
        if self.payload < 0:
            raise ValueError("payload must be >= 0")
        if self.mode not in ("MF", "SL"):
            raise ValueError("mode must be 'MF' or 'SL'")
        if self.mode == "SL" and self.pik_model is None:
            raise ValueError("SL mode needs a fitted surrogate model")
        if self.plant_cfg is None:
            self.plant_cfg = self.emla_cfg


def perturbed_plant(cfg: emla.EmlaConfig, tau_c_scale: float = 1.3,
                    mu_scale: float = 1.15,
                    f_v_scale: float = 1.2) -> emla.EmlaConfig:
    """Nominal model with the friction terms scaled, standing in for the
    unmodeled reality of a physical rig."""
    motor = replace(cfg.motor, tau_c=cfg.motor.tau_c * tau_c_scale,
                    f_v=cfg.motor.f_v * f_v_scale)
    trans = replace(cfg.trans, mu=cfg.trans.mu * mu_scale)
    return emla.EmlaConfig(motor=motor, trans=trans, M_t=cfg.M_t)


@dataclass
class TrackingReport:
    """RMS/maximum tracking errors of one run (position mm, velocity mm/s)."""

    mode: str
    payload: float
    rms_pos_mm: float
    max_pos_mm: float
    rms_vel_mm_s: float
    max_vel_mm_s: float
    diverged: bool
    saturation_events: int
    theta_within_bounds: bool = True

    def as_dict(self) -> dict:
        return {
            "mode": self.mode, "payload_kg": self.payload,
            "rms_pos_mm": self.rms_pos_mm, "max_pos_mm": self.max_pos_mm,
            "rms_vel_mm_s": self.rms_vel_mm_s, "max_vel_mm_s": self.max_vel_mm_s,
            "diverged": self.diverged,
            "saturation_events": self.saturation_events,
        }


@dataclass
class ControlTrace:
    """Per-step closed-loop record."""

    t: np.ndarray
    x_ref: np.ndarray
    x: np.ndarray
    xdot_ref: np.ndarray
    xdot: np.ndarray
    F_Lr: np.ndarray
    F_emulated: np.ndarray
    F_pred: np.ndarray
    v_d: np.ndarray
    v_q: np.ndarray

    HEADER = "t,x_ref,x,xdot_ref,xdot,F_Lr,F_emulated,F_pred,v_d,v_q"

    def to_csv(self, path, manifest_hash: str | None = None) -> None:
        cols = np.column_stack([self.t, self.x_ref, self.x, self.xdot_ref,
                                self.xdot, self.F_Lr, self.F_emulated,
                                self.F_pred, self.v_d, self.v_q])
        with open(path, "w") as f:
            if manifest_hash:
                f.write(f"# run_manifest: {manifest_hash}\n")
            f.write(self.HEADER + "\n")
            np.savetxt(f, cols, delimiter=",", fmt="%.12g")


def tracking_metrics(reference, actual, mode: str = "", payload: float = 0.0,
                     velocity_reference=None, velocity_actual=None,
                     diverged: bool = False,
                     saturation_events: int = 0) -> TrackingReport:
    """RMS and maximum errors; positions in mm, velocities in mm/s."""
    reference = np.asarray(reference, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if reference.shape != actual.shape or reference.size == 0:
        raise ValueError("series must be non-empty and equal length")
    e = (reference - actual) * 1e3
    rms_p = float(np.sqrt(np.mean(e ** 2)))
    max_p = float(np.max(np.abs(e)))
    if velocity_reference is not None:
        ev = (np.asarray(velocity_reference) - np.asarray(velocity_actual)) * 1e3
        rms_v = float(np.sqrt(np.mean(ev ** 2)))
        max_v = float(np.max(np.abs(ev)))
    else:
        rms_v = max_v = 0.0
    return TrackingReport(mode=mode, payload=payload, rms_pos_mm=rms_p,
                          max_pos_mm=max_p, rms_vel_mm_s=rms_v,
                          max_vel_mm_s=max_v, diverged=diverged,
                          saturation_events=saturation_events)


# ---------------------------------------------------------------------------
# Load emulator


def load_emulator_profile(chain: vdc.ChainModel, payload: float, spec,
                          n_knots: int = 200):
    """Static lift force along the commanded trajectory, as an interpolant.

    Returns (x_knots, F_knots); forces are clamped to the emulator envelope.
    """
    loaded = chain.with_payload(payload)
    geom = chain.chain_geoms["lift"]
    t_knots = np.linspace(0.0, spec.t_end, n_knots)
    x_knots = np.array([trajectory.eval_trajectory(spec, t)[0][0] for t in t_knots])
    F_knots = np.empty(n_knots)
    for k, x in enumerate(x_knots):
        q = geom.angle_from_length(x)
        zeta = REST_POSTURE.copy()
        zeta[1] = q
        F_knots[k] = vdc.chain_statics(loaded, zeta)["F_L"]["lift"]
    order = np.argsort(x_knots)
    return x_knots[order], np.clip(F_knots[order], 0.0, F_EMULATOR_MAX)


def load_emulator(t: float, payload: float, chain: vdc.ChainModel, spec) -> float:
    """Emulated opposing force at time t along the commanded trajectory."""
    x_d = trajectory.eval_trajectory(spec, t)[0][0]
    q = chain.chain_geoms["lift"].angle_from_length(x_d)
    zeta = REST_POSTURE.copy()
    zeta[1] = q
    F = vdc.chain_statics(chain.with_payload(payload), zeta)["F_L"]["lift"]
    return float(np.clip(F, 0.0, F_EMULATOR_MAX))


# ---------------------------------------------------------------------------
# High level


class HighLevelController:
    """Adaptive manipulator-level controller for the lift chain."""

    def __init__(self, chain: vdc.ChainModel, gains: ControllerGains,
                 payload: float, theta0_scale: float = 1.0,
                 adaptation: bool = False, unknown_payload: bool = False,
                 dt: float = emla.DT_DEFAULT):
        self.chain = chain.with_payload(payload)
        self.gains = gains
        self.dt = dt
        self.adaptation = adaptation and gains.gamma > 0.0
        bodies = self.chain.body_map()
        self.theta_hat = {f: theta0_scale * b.theta for f, b in bodies.items()}
        span = gains.theta_bounds_scale
        self.theta_lo = {f: th - span * np.abs(th) for f, th in self.theta_hat.items()}
        self.theta_hi = {f: th + span * np.abs(th) for f, th in self.theta_hat.items()}
        if unknown_payload and "tool" in self.theta_hat:
            # the picked-up load is not known a priori; adaptation owns it
            full = self.theta_hat["tool"]
            self.theta_hat["tool"] = np.zeros_like(full)
            self.theta_lo["tool"] = -0.1 * np.abs(full) - 1e-9
            self.theta_hi["tool"] = 1.5 * np.abs(full) + 1e-9
        self._vr_prev: dict | None = None

    def theta_within_bounds(self) -> bool:
        return all(np.all(self.theta_hat[f] >= self.theta_lo[f] - 1e-12)
                   and np.all(self.theta_hat[f] <= self.theta_hi[f] + 1e-12)
                   for f in self.theta_hat)

    def step(self, zeta, zeta_dot, zeta_dot_r):
        """One Eq.-(29)-style update: required wrenches, actuator demands,
        and the adaptation update. Returns (F_Lr, xdot_Lr) for the lift."""
        chain = self.chain
        fr = chain.frames(zeta)
        kin = vdc.vdc_kinematics(chain, zeta, zeta_dot, frames=fr)
        kin_r = vdc.vdc_kinematics(chain, zeta, zeta_dot_r, frames=fr)
        V, V_r = kin["V"], kin_r["V"]

        bodies = chain.body_map()
        K_A = self.gains.K_A
        fstar = {}
        for f in bodies:
            g_f = fr["world"][f].R.T @ chain.gravity
            vdot_r = np.zeros(6)
            if self._vr_prev is not None and f in self._vr_prev:
                vdot_r = (V_r[f] - self._vr_prev[f]) / self.dt
            Y = vdc.regressor(V_r[f], vdot_r, g_f)
            err = V_r[f] - V[f]
            fstar[f] = Y @ self.theta_hat[f] + K_A @ err
            if self.adaptation:
                th = self.theta_hat[f] + self.gains.gamma * (Y.T @ err) * self.dt
                self.theta_hat[f] = np.clip(th, self.theta_lo[f], self.theta_hi[f])
        self._vr_prev = V_r

        dyn = vdc.vdc_dynamics(chain, zeta, V, V_r, frames=fr,
                               fstar_override=fstar)
        return float(dyn["F_L"]["lift"]), float(kin_r["xdot"]["lift"])


# ---------------------------------------------------------------------------
# Low level


class LowLevelController:
    """Voltage law tracking required force and velocity (Eq.-(30) form)."""

    def __init__(self, cfg: emla.EmlaConfig, gains: ControllerGains,
                 dt: float = emla.DT_DEFAULT, v_sat: float = V_SAT):
        self.cfg = cfg
        self.gains = gains
        self.dt = dt
        self.v_sat = v_sat
        self._iqr_prev = 0.0
        self._diqr_filt = 0.0
        self._alpha = 2.0 * math.pi * gains.deriv_cutoff_hz * dt
        self.saturation_events = 0

    def step(self, i_d, i_q, omega_m, F_Lr, xdot_Lr, F_fb, xdot_fb):
        m = self.cfg.motor
        k = 1.5 * m.P * m.psi_f
        tau_r = emla.m2l_inverse_torque(F_Lr, xdot_Lr, self.cfg)
        i_qr = tau_r / k
        raw = (i_qr - self._iqr_prev) / self.dt
        self._diqr_filt += min(self._alpha, 1.0) * (raw - self._diqr_filt)
        self._iqr_prev = i_qr

        v_d = (m.r_s * i_d - m.L_q * m.P * omega_m * i_q
               + self.gains.K_i * (0.0 - i_d))
        v_q = (m.r_s * i_q + m.L_q * self._diqr_filt
               + m.L_d * m.P * omega_m * i_d + m.P * m.psi_f * omega_m
               + self.gains.K_f * (F_Lr - F_fb)
               + self.gains.K_v * (xdot_Lr - xdot_fb))
        v_d_c = min(max(v_d, -self.v_sat), self.v_sat)
        v_q_c = min(max(v_q, -self.v_sat), self.v_sat)
        if v_d_c != v_d or v_q_c != v_q:
            self.saturation_events += 1
        return v_d_c, v_q_c


# ---------------------------------------------------------------------------
# Experiment runner


def run_experiment(cfg: TestbedConfig, duration: float | None = None,
                   seed: int = 0):
    """Closed 1 kHz loop on the lift chain; returns (report, trace).

    Trajectory -> soft limits -> high-level sweep -> feedback source (exact
    sensors or surrogate) -> voltage law -> actuator step against the
    emulated load. Divergence beyond 0.1 m aborts and is flagged.
    """
    chain = cfg.chain
    geom = chain.chain_geoms["lift"]
    dt = cfg.dt
    duration = duration if duration is not None else cfg.t_end + 4.0
    n = round(duration / dt)
    rng = np.random.default_rng(seed)

    x0 = geom.solve(cfg.lift_start)[0]
    spec = trajectory.quintic_coeffs([x0], [cfg.x_target], cfg.t_end)
    limits = trajectory.JointLimits.from_chain(chain)

    x_knots, F_knots = load_emulator_profile(chain, cfg.payload, spec)
    high = HighLevelController(chain, cfg.gains, cfg.payload,
                               theta0_scale=cfg.theta0_scale,
                               adaptation=cfg.adaptation,
                               unknown_payload=cfg.unknown_payload, dt=dt)
    low = LowLevelController(cfg.emla_cfg, cfg.gains, dt=dt)

    state = emla.EmlaState(x_L=x0)
    m = cfg.emla_cfg.motor
    k_t = 1.5 * m.P * m.psi_f
    cols = np.empty((n, 10))
    diverged = False
    zeta = REST_POSTURE.copy()
    zeta_dot = np.zeros(6)
    zeta_dot_r = np.zeros(6)

    for step in range(n):
        t = step * dt
        x_d, xdot_d = (float(v[0]) for v in trajectory.eval_trajectory(spec, t))
        x = state.x_L
        xdot_r = xdot_d + cfg.gains.lam * (x_d - x)

        q = geom.angle_from_length(x)
        gain = geom.solve(q)[2]
        zeta[1] = q
        zeta_dot[1] = state.xdot_L / gain
        zeta_dot_r[1] = xdot_r / gain
        zeta_dot_r_safe = trajectory.soft_limit_scale(zeta, zeta_dot_r, limits)

        F_Lr, xdot_Lr = high.step(zeta, zeta_dot, zeta_dot_r_safe)

        F_em = float(np.interp(x_d, x_knots, F_knots))
        if cfg.mode == "SL":
            tau_e = emla.electromagnetic_torque(state.i_d, state.i_q, m)
            Y, _ = cfg.pik_model.predict(np.array([tau_e]),
                                         np.array([state.omega_m]))
            F_fb, xdot_fb = float(Y[0, 0]), float(Y[0, 1])
            i_q_fb = tau_e / k_t  # currents reconstructed from torque
            i_d_fb = 0.0
        else:
            F_fb = F_em + (rng.normal(0.0, cfg.sensor_noise_F)
                           if cfg.sensor_noise_F else 0.0)
            xdot_fb = state.xdot_L + (rng.normal(0.0, cfg.sensor_noise_v)
                                      if cfg.sensor_noise_v else 0.0)
            i_q_fb, i_d_fb = state.i_q, state.i_d

        v_d, v_q = low.step(i_d_fb, i_q_fb, state.omega_m, F_Lr, xdot_Lr,
                            F_fb, xdot_fb)
        state = emla.step_emla(state, v_d, v_q, F_em, cfg.plant_cfg, dt)
        cols[step] = (t + dt, x_d, state.x_L, xdot_d, state.xdot_L, F_Lr,
                      F_em, F_fb, v_d, v_q)
        if abs(x_d - state.x_L) > DIVERGENCE_LIMIT:
            cols = cols[:step + 1]
            diverged = True
            break

    trace = ControlTrace(t=cols[:, 0], x_ref=cols[:, 1], x=cols[:, 2],
                         xdot_ref=cols[:, 3], xdot=cols[:, 4], F_Lr=cols[:, 5],
                         F_emulated=cols[:, 6], F_pred=cols[:, 7],
                         v_d=cols[:, 8], v_q=cols[:, 9])
    report = tracking_metrics(trace.x_ref, trace.x, mode=cfg.mode,
                              payload=cfg.payload,
                              velocity_reference=trace.xdot_ref,
                              velocity_actual=trace.xdot,
                              diverged=diverged,
                              saturation_events=low.saturation_events)
    report.theta_within_bounds = high.theta_within_bounds()
    return report, trace


def payload_sweep(cfg: TestbedConfig, payloads, duration: float | None = None,
                  seed: int = 0):
    """Independent runs over a payload grid; returns reports keyed by payload."""
    out = []
    for payload in payloads:
        run_cfg = replace(cfg, payload=float(payload))
        report, _ = run_experiment(run_cfg, duration=duration, seed=seed)
        out.append(report)
    return out
