"""Quintic Cartesian trajectories and joint-space safety.

A fifth-order point-to-point profile with zero boundary velocity and
acceleration, a position-correction term on the required velocity, a
damped-least-squares Cartesian-to-joint map, and per-joint soft-limit
velocity scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DLS_LAMBDA = 1e-3       # damping used once sigma_min drops below threshold
DLS_SIGMA_MIN = 1e-2


@dataclass(frozen=True)
class QuinticSpec:
    """Coefficients of P(t) = sum a_i t^i meeting rest-to-rest boundaries."""

    P_start: np.ndarray
    P_final: np.ndarray
    t_end: float
    coeffs: np.ndarray  # (6, dim), row i is a_i

    @property
    def dim(self) -> int:
        return self.P_start.shape[0]


def quintic_coeffs(P_start, P_final, t_end: float) -> QuinticSpec:
    """Closed-form rest-to-rest quintic: a3 = 10 D/t^3, a4 = -15 D/t^4,
    a5 = 6 D/t^5."""
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    P_start = np.atleast_1d(np.asarray(P_start, dtype=float))
    P_final = np.atleast_1d(np.asarray(P_final, dtype=float))
    if P_start.shape != P_final.shape:
        raise ValueError("P_start and P_final must have the same shape")
    delta = P_final - P_start
    coeffs = np.zeros((6, P_start.shape[0]))
    coeffs[0] = P_start
    coeffs[3] = 10.0 * delta / t_end ** 3
    coeffs[4] = -15.0 * delta / t_end ** 4
    coeffs[5] = 6.0 * delta / t_end ** 5
    return QuinticSpec(P_start=P_start, P_final=P_final, t_end=t_end, coeffs=coeffs)


def eval_trajectory(spec: QuinticSpec, t: float):
    """(P_d, Pdot_d) at time t; clamps to (P_final, 0) after t_end."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t > spec.t_end:
        return spec.P_final.copy(), np.zeros(spec.dim)
    powers = t ** np.arange(6)
    P = powers @ spec.coeffs
    dpowers = np.arange(1, 6)[:, None] * (t ** np.arange(5))[:, None]
    Pdot = np.sum(dpowers * spec.coeffs[1:], axis=0)
    return P, Pdot


def required_velocity(P_d, Pdot_d, P_meas, lam: float) -> np.ndarray:
    """Pdot_r = Pdot_d + lam (P_d - P)."""
    if lam <= 0:
        raise ValueError("correction gain must be > 0")
    return np.asarray(Pdot_d, dtype=float) + lam * (
        np.asarray(P_d, dtype=float) - np.asarray(P_meas, dtype=float))


@dataclass(frozen=True)
class JointVelocityResult:
    theta_dot: np.ndarray
    sigma_min: float
    damped: bool


def joint_velocities(J: np.ndarray, Pidot_r,
                     dls_lambda: float = DLS_LAMBDA,
                     sigma_threshold: float = DLS_SIGMA_MIN) -> JointVelocityResult:
    """Joint rates inverting J, damped near singularities.

    Away from singularities (sigma_min >= threshold) the exact inverse is
    used; otherwise singular values are regularised as s/(s^2 + lambda^2).
    """
    J = np.asarray(J, dtype=float)
    rhs = np.asarray(Pidot_r, dtype=float)
    U, s, Vt = np.linalg.svd(J)
    sigma_min = float(s[-1])
    damped = sigma_min < sigma_threshold
    if damped:
        inv_s = s / (s ** 2 + dls_lambda ** 2)
    else:
        inv_s = 1.0 / s
    theta_dot = Vt.T @ (inv_s * (U.T @ rhs))
    return JointVelocityResult(theta_dot=theta_dot, sigma_min=sigma_min, damped=damped)


@dataclass(frozen=True)
class JointLimits:
    """Per-joint position bounds and soft margins."""

    zeta_min: np.ndarray
    zeta_max: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.zeta_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.zeta_max, dtype=float))
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        object.__setattr__(self, "zeta_min", lo)
        object.__setattr__(self, "zeta_max", hi)
        object.__setattr__(self, "m", m)
        if np.any(lo >= hi):
            raise ValueError("zeta_min must be < zeta_max")
        if np.any(m <= 0) or np.any(m >= (hi - lo) / 2.0):
            raise ValueError("margins must lie in (0, span/2)")

    @classmethod
    def from_chain(cls, chain) -> "JointLimits":
        lo, hi, m = chain.limits_arrays()
        return cls(zeta_min=lo, zeta_max=hi, m=m)


def soft_limit_scale(zeta, zeta_dot_r, limits: JointLimits) -> np.ndarray:
    """Scale each required joint rate near its bound; s_i clamped to [0, 1]."""
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    zd = np.atleast_1d(np.asarray(zeta_dot_r, dtype=float))
    s = np.ones_like(zd)
    near_lo = (zeta <= limits.zeta_min + limits.m) & (zd < 0)
    near_hi = (zeta >= limits.zeta_max - limits.m) & (zd > 0)
    s[near_lo] = (zeta[near_lo] - limits.zeta_min[near_lo]) / limits.m[near_lo]
    s[near_hi] = (limits.zeta_max[near_hi] - zeta[near_hi]) / limits.m[near_hi]
    return np.clip(s, 0.0, 1.0) * zd


def simulate_cartesian_tracking(chain, P_final, t_end: float, duration: float,
                                zeta0, lam: float = 2.0, dt: float = 1e-3):
    """Kinematic closed loop: quintic TCP goal -> required velocity ->
    damped IK -> soft limits -> integrate joints as perfectly tracked.

    Returns (t, zeta history, tcp history); used to exercise the
    joint-limit guarantee at the 1 kHz control rate.
    """
    from . import vdc

    zeta = np.asarray(zeta0, dtype=float).copy()
    spec = quintic_coeffs(vdc.tcp_position(chain, zeta), P_final, t_end)
    limits = JointLimits.from_chain(chain)
    n = round(duration / dt)
    hist = np.empty((n + 1, 6))
    tcp = np.empty((n + 1, 3))
    hist[0] = zeta
    tcp[0] = vdc.tcp_position(chain, zeta)
    for k in range(n):
        fr = chain.frames(zeta)
        P_d, Pdot_d = eval_trajectory(spec, k * dt)
        P = vdc.tcp_position(chain, zeta, frames=fr)
        v_r = required_velocity(P_d, Pdot_d, P, lam)
        rhs = np.concatenate([v_r, np.zeros(3)])  # orientation rows zero
        J = vdc.tcp_jacobian(chain, zeta, frames=fr)
        zd_r = joint_velocities(J, rhs).theta_dot
        zd_safe = soft_limit_scale(zeta, zd_r, limits)
        zeta = zeta + zd_safe * dt
        hist[k + 1] = zeta
        tcp[k + 1] = vdc.tcp_position(chain, zeta)
    t = dt * np.arange(n + 1)
    return t, hist, tcp
