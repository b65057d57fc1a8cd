"""Spatial-vector machinery for the manipulator.

6-D velocity/force transforms between body frames, rigid-body net forces
in regressor form, and the recursive base-to-tip kinematics and
tip-to-base dynamics sweeps over a chain with linear-actuator closed
loops at the lift and tilt joints.

Vector layout is [linear; angular]: V = [v; w], F = [f; tau]. A frame
transform (R, r) maps child coordinates into parent ones, with r the
child origin expressed in the parent frame. Velocities propagate
parent -> child via U^T, forces child -> parent via U.

The manipulator plane convention: after the vertical-axis base joint the
lift/tilt geometry lives in the local x-y plane (x reach, y up), with
revolute axes along +z and actuator extension along local +x.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

EMLA_JOINTS = ("lift", "tilt")
JOINT_NAMES = ("slew", "lift", "tilt", "wrist_roll", "wrist_pitch", "wrist_roll2")

# joint-motion selectors in the moved frame
X_F = np.array([1.0, 0, 0, 0, 0, 0])    # prismatic along x
X_TAU = np.array([0.0, 0, 0, 1, 0, 0])  # revolute about x
Y_TAU = np.array([0.0, 0, 0, 0, 1, 0])  # revolute about y
Z_TAU = np.array([0.0, 0, 0, 0, 0, 1])  # revolute about z


def skew(r) -> np.ndarray:
    """Cross-product operator: skew(r) @ x == r x x."""
    x, y, z = r
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


@dataclass(frozen=True)
class FrameTransform:
    """Pose of frame B relative to frame A: rotation R and offset r."""

    R: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-10 or np.linalg.det(R) < 0.0:
            raise ValueError("R must be a proper rotation matrix")

    def compose(self, other: "FrameTransform") -> "FrameTransform":
        """A->B composed with B->C gives A->C."""
        return _ft(self.R @ other.R, self.r + self.R @ other.r)

    @classmethod
    def identity(cls) -> "FrameTransform":
        return cls(np.eye(3), np.zeros(3))


def _ft(R, r) -> FrameTransform:
    # trusted fast path for transforms built from rot_*/compose, which are
    # proper rotations by construction; skips the validation matmuls
    T = object.__new__(FrameTransform)
    object.__setattr__(T, "R", R)
    object.__setattr__(T, "r", np.asarray(r, dtype=float))
    return T


@dataclass(frozen=True)
class SpatialVelocity:
    v: np.ndarray
    w: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    @classmethod
    def from_vector(cls, V) -> "SpatialVelocity":
        V = np.asarray(V, dtype=float)
        return cls(V[:3].copy(), V[3:].copy())


@dataclass(frozen=True)
class SpatialForce:
    f: np.ndarray
    tau: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.f, self.tau])

    @classmethod
    def from_vector(cls, F) -> "SpatialForce":
        F = np.asarray(F, dtype=float)
        return cls(F[:3].copy(), F[3:].copy())


def velocity_transform(T: FrameTransform) -> np.ndarray:
    """6x6 spatial transform U = [[R, 0], [skew(r) R, R]]."""
    U = np.zeros((6, 6))
    U[:3, :3] = T.R
    U[3:, 3:] = T.R
    U[3:, :3] = skew(T.r) @ T.R
    return U


def transform_velocity(U: np.ndarray, V_parent) -> np.ndarray:
    """Child-frame velocity U^T V of the same rigid body."""
    return U.T @ np.asarray(V_parent, dtype=float)


def transform_force(U: np.ndarray, F_child) -> np.ndarray:
    """Parent-frame wrench U F of the same rigid body."""
    return U @ np.asarray(F_child, dtype=float)


# ---------------------------------------------------------------------------
# Rigid-body net force and its regressor form


@dataclass(frozen=True)
class BodyParams:
    """Mass, COM offset and COM inertia of one link, in its body frame."""

    m: float
    com: np.ndarray
    I: np.ndarray  # 3x3 about the COM

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float))
        I = np.asarray(self.I, dtype=float)
        object.__setattr__(self, "I", I)
        if self.m <= 0:
            raise ValueError("body mass must be > 0")
        if np.max(np.abs(I - I.T)) > 1e-9:
            raise ValueError("inertia tensor must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (I + I.T))) < -1e-9:
            raise ValueError("inertia tensor must be positive semidefinite")

    @property
    def theta(self) -> np.ndarray:
        """10-vector (m, m*com, vech(I about frame origin))."""
        S = skew(self.com)
        I_o = self.I - self.m * (S @ S)
        h = self.m * self.com
        return np.array([self.m, h[0], h[1], h[2],
                         I_o[0, 0], I_o[0, 1], I_o[0, 2],
                         I_o[1, 1], I_o[1, 2], I_o[2, 2]])


def _inertia_times(w) -> np.ndarray:
    """L(w) with L(w) @ vech(I) == I @ w."""
    wx, wy, wz = w
    return np.array([[wx, wy, wz, 0.0, 0.0, 0.0],
                     [0.0, wx, 0.0, wy, wz, 0.0],
                     [0.0, 0.0, wx, 0.0, wy, wz]])


def regressor(V, Vdot, gravity) -> np.ndarray:
    """6x10 matrix Y with Y @ theta = net force, linear in theta."""
    V = np.asarray(V, dtype=float)
    Vdot = np.asarray(Vdot, dtype=float)
    g = np.asarray(gravity, dtype=float)
    v, w = V[:3], V[3:]
    vd, wd = Vdot[:3], Vdot[3:]
    Y = np.zeros((6, 10))
    Sw = skew(w)
    vxw = np.array([v[1] * w[2] - v[2] * w[1],
                    v[2] * w[0] - v[0] * w[2],
                    v[0] * w[1] - v[1] * w[0]])
    Y[:3, 0] = vd + Sw @ v - g
    Y[:3, 1:4] = skew(wd) + Sw @ Sw
    Y[3:, 1:4] = skew(vxw + g - vd)
    Y[3:, 4:] = _inertia_times(wd) + Sw @ _inertia_times(w)
    return Y


def net_force(body: BodyParams, V, Vdot, gravity) -> np.ndarray:
    """Net wrench F* = M_A dV/dt + C_A V + G_A on the body, in its frame."""
    V = np.asarray(V, dtype=float)
    Vdot = np.asarray(Vdot, dtype=float)
    g = np.asarray(gravity, dtype=float)
    m = body.m
    Sc = skew(body.com)
    I_o = body.I - m * (Sc @ Sc)
    v, w = V[:3], V[3:]
    Sw, Sv = skew(w), skew(v)

    M = np.zeros((6, 6))
    M[:3, :3] = m * np.eye(3)
    M[:3, 3:] = -m * Sc
    M[3:, :3] = m * Sc
    M[3:, 3:] = I_o

    C = np.zeros((6, 6))
    C[:3, :3] = m * Sw
    C[:3, 3:] = -m * Sw @ Sc
    C[3:, :3] = m * Sw @ Sc
    C[3:, 3:] = Sw @ I_o - m * Sv @ Sc

    G = np.concatenate([-m * g, -m * Sc @ g])
    return M @ Vdot + C @ V + G


def net_force_from_theta(theta, V, Vdot, gravity) -> np.ndarray:
    return regressor(V, Vdot, gravity) @ np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# Closed-chain actuator geometry


@dataclass(frozen=True)
class ClosedChainGeom:
    """Planar triangle of a linear actuator driving a hinged link.

    hinge (a) and cyl_base (c) sit on the carrying body; rod_attach (t_b)
    is fixed in the lifted link. All 2-D, in the chain-base x-y plane.
    """

    hinge: np.ndarray
    cyl_base: np.ndarray
    rod_attach: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hinge", np.asarray(self.hinge, dtype=float))
        object.__setattr__(self, "cyl_base", np.asarray(self.cyl_base, dtype=float))
        object.__setattr__(self, "rod_attach", np.asarray(self.rod_attach, dtype=float))

    def solve(self, q: float):
        """Geometry at link angle q.

        Returns (x, alpha, dx_dq, dalpha_dq): actuator length, actuator
        direction angle, and their sensitivities to q.
        """
        cq, sq = math.cos(q), math.sin(q)
        tb = self.rod_attach
        p_t = self.hinge + np.array([cq * tb[0] - sq * tb[1], sq * tb[0] + cq * tb[1]])
        u = p_t - self.cyl_base
        x = math.hypot(u[0], u[1])
        if x < 1e-9:
            raise ValueError("singular closed-chain geometry: zero-length actuator")
        alpha = math.atan2(u[1], u[0])
        # dp_t/dq is the perpendicular of the hinge-to-attachment vector
        r = p_t - self.hinge
        dp = np.array([-r[1], r[0]])
        dx_dq = (u[0] * dp[0] + u[1] * dp[1]) / x
        dalpha_dq = (u[0] * dp[1] - u[1] * dp[0]) / (x * x)
        return x, alpha, dx_dq, dalpha_dq

    def angle_from_length(self, x: float) -> float:
        """Invert solve(): link angle at actuator length x (elbow-up branch)."""
        d = self.cyl_base - self.hinge
        dd = math.hypot(d[0], d[1])
        ee = math.hypot(self.rod_attach[0], self.rod_attach[1])
        cos_th = (dd * dd + ee * ee - x * x) / (2.0 * dd * ee)
        if not -1.0 <= cos_th <= 1.0:
            raise ValueError(f"actuator length {x} outside triangle range")
        th = math.acos(cos_th)
        gamma = math.atan2(d[1], d[0])
        beta = math.atan2(self.rod_attach[1], self.rod_attach[0])
        return th + gamma - beta

    def length_range(self, q_min: float, q_max: float) -> tuple[float, float]:
        qs = np.linspace(q_min, q_max, 64)
        xs = [self.solve(q)[0] for q in qs]
        return min(xs), max(xs)


# ---------------------------------------------------------------------------
# Chain model


@dataclass(frozen=True)
class JointSpec:
    name: str
    limits: tuple[float, float]
    margin: float

    def __post_init__(self):
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError(f"{self.name}: joint limits must satisfy lo < hi")
        if not 0.0 < self.margin < (hi - lo) / 2.0:
            raise ValueError(f"{self.name}: margin must be in (0, span/2)")


@dataclass(frozen=True)
class ChainModel:
    """Six-joint manipulator: slew base, lift and tilt closed chains,
    three-axis wrist, with per-link bodies and an optional tool payload."""

    gravity: np.ndarray
    joints: tuple[JointSpec, ...]          # ordered per JOINT_NAMES
    base_origin: np.ndarray                # T1 origin in world
    chain_offsets: dict                    # name -> 2-D offset to chain base
    chain_geoms: dict                      # name -> ClosedChainGeom
    chain_next: dict                       # name -> 2-D next-block origin in link coords
    wrist_origins: tuple                   # three 3-D offsets in preceding frames
    tool_offset: np.ndarray
    bodies: dict                           # frame name -> BodyParams
    payload: float = 0.0                   # point mass at the tool frame [kg]

    def joint(self, name: str) -> JointSpec:
        return self.joints[JOINT_NAMES.index(name)]

    def limits_arrays(self):
        lo = np.array([j.limits[0] for j in self.joints])
        hi = np.array([j.limits[1] for j in self.joints])
        margin = np.array([j.margin for j in self.joints])
        return lo, hi, margin

    def with_payload(self, mass: float) -> "ChainModel":
        if mass < 0:
            raise ValueError("payload must be >= 0")
        return replace(self, payload=mass)

    # -- frame tree ---------------------------------------------------------

    def frames(self, zeta) -> dict:
        """Relative transforms and world poses at configuration zeta.

        Returns {"rel": {(parent, child): FrameTransform},
                 "world": {frame: FrameTransform}, "geom": {chain: tuple}}.
        """
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (6,):
            raise ValueError("zeta must have 6 entries")
        rel: dict = {}
        geom: dict = {}

        # base: vertical-axis joint realized as local-y rotation
        R_pre = rot_x(math.pi / 2.0)
        rel[("B1", "T1")] = _ft(R_pre @ rot_y(zeta[0]), self.base_origin)

        parent = "T1"
        for idx, name in enumerate(EMLA_JOINTS):
            q = zeta[1 + idx]
            g = self.chain_geoms[name]
            x, alpha, dx_dq, dalpha_dq = g.solve(q)
            geom[name] = (x, alpha, dx_dq, dalpha_dq)
            off = self.chain_offsets[name]
            bc, a, tc = f"Bc_{name}", f"A_{name}", f"Tc_{name}"
            c, d, t2 = f"C_{name}", f"D_{name}", f"T2_{name}"
            rel[(parent, bc)] = _ft(np.eye(3), [off[0], off[1], 0.0])
            rel[(bc, a)] = _ft(rot_z(q), [g.hinge[0], g.hinge[1], 0.0])
            rel[(a, tc)] = _ft(np.eye(3), [g.rod_attach[0], g.rod_attach[1], 0.0])
            rel[(bc, c)] = _ft(rot_z(alpha), [g.cyl_base[0], g.cyl_base[1], 0.0])
            rel[(c, d)] = _ft(np.eye(3), [x, 0.0, 0.0])
            rel[(d, t2)] = _ft(rot_z(q - alpha), np.zeros(3))
            nxt = self.chain_next[name] - g.rod_attach
            rel[(tc, f"next_{name}")] = _ft(np.eye(3), [nxt[0], nxt[1], 0.0])
            parent = f"next_{name}"

        o4, o5, o6 = self.wrist_origins
        rel[(parent, "B4")] = _ft(np.eye(3), np.zeros(3))
        rel[("B4", "A4")] = _ft(rot_x(zeta[3]), o4)
        rel[("A4", "C4")] = _ft(rot_z(zeta[4]), o5)
        rel[("C4", "D4")] = _ft(rot_x(zeta[5]), o6)
        rel[("D4", "tool")] = _ft(np.eye(3), self.tool_offset)

        world = {"B1": _ft(np.eye(3), np.zeros(3))}
        for (p, ch), T in rel.items():
            world[ch] = world[p].compose(T)
        U = {edge: velocity_transform(T) for edge, T in rel.items()}
        return {"rel": rel, "world": world, "geom": geom, "U": U}

    def body_map(self) -> dict:
        """Frame -> BodyParams including the current payload at the tool."""
        out = dict(self.bodies)
        if self.payload > 0.0:
            out["tool"] = BodyParams(m=self.payload, com=np.zeros(3),
                                     I=np.zeros((3, 3)))
        return out

    def actuator_length(self, name: str, q: float) -> float:
        return self.chain_geoms[name].solve(q)[0]

    def actuator_gain(self, name: str, q: float) -> float:
        """dx/dq of the closed chain [m/rad]."""
        return self.chain_geoms[name].solve(q)[2]


def vdc_kinematics(chain: ChainModel, zeta, zeta_dot,
                   frames: dict | None = None) -> dict:
    """Base-to-tip velocity sweep.

    Returns {"V": {frame: 6-vector}, "xdot": {chain: actuator velocity},
    "x": {chain: actuator length}, "frames": frame tree}.
    """
    zeta_dot = np.asarray(zeta_dot, dtype=float)
    fr = frames or chain.frames(zeta)
    geom, U = fr["geom"], fr["U"]
    V: dict = {"B1": np.zeros(6)}

    V["T1"] = Y_TAU * zeta_dot[0] + U[("B1", "T1")].T @ V["B1"]

    parent = "T1"
    xdot: dict = {}
    x_len: dict = {}
    for idx, name in enumerate(EMLA_JOINTS):
        qd = zeta_dot[1 + idx]
        x, alpha, dx_dq, dalpha_dq = geom[name]
        bc, a, tc = f"Bc_{name}", f"A_{name}", f"Tc_{name}"
        c, d, t2 = f"C_{name}", f"D_{name}", f"T2_{name}"
        V[bc] = U[(parent, bc)].T @ V[parent]
        # chain 1: the structural hinge
        V[a] = Z_TAU * qd + U[(bc, a)].T @ V[bc]
        V[tc] = U[(a, tc)].T @ V[a]
        # chain 2: cylinder pivot, prismatic rod, rod-end pivot
        ad = dalpha_dq * qd
        xd = dx_dq * qd
        V[c] = Z_TAU * ad + U[(bc, c)].T @ V[bc]
        V[d] = X_F * xd + U[(c, d)].T @ V[c]
        V[t2] = Z_TAU * (qd - ad) + U[(d, t2)].T @ V[d]
        xdot[name] = xd
        x_len[name] = x
        nxt = f"next_{name}"
        V[nxt] = U[(tc, nxt)].T @ V[tc]
        parent = nxt

    V["B4"] = U[(parent, "B4")].T @ V[parent]
    V["A4"] = X_TAU * zeta_dot[3] + U[("B4", "A4")].T @ V["B4"]
    V["C4"] = Z_TAU * zeta_dot[4] + U[("A4", "C4")].T @ V["A4"]
    V["D4"] = X_TAU * zeta_dot[5] + U[("C4", "D4")].T @ V["C4"]
    V["tool"] = U[("D4", "tool")].T @ V["D4"]
    return {"V": V, "xdot": xdot, "x": x_len, "frames": fr}


def _gravity_in(chain: ChainModel, world: dict, frame: str) -> np.ndarray:
    return world[frame].R.T @ chain.gravity


def vdc_dynamics(chain: ChainModel, zeta, V: dict, V_r: dict,
                 K_A: np.ndarray | None = None,
                 theta_hat: dict | None = None,
                 Vdot_r: dict | None = None,
                 frames: dict | None = None,
                 fstar_override: dict | None = None) -> dict:
    """Tip-to-base force sweep.

    Per body, the required net wrench is Y(Vdot_r, V_r) theta + K_A (V_r - V)
    (or the caller-supplied wrench from fstar_override); wrenches then
    propagate toward the base through the wrist block, the closed chains
    and the base joint. Actuator forces come from the planar moment balance
    about each chain hinge (the massless cylinder is a two-force member).

    Returns {"F": {frame: wrench}, "F_L": {chain: actuator force},
    "tau_base": slew torque}.
    """
    fr = frames or chain.frames(zeta)
    rel, world = fr["rel"], fr["world"]
    bodies = chain.body_map() if fstar_override is None else {}
    theta_hat = theta_hat or {}
    K_A = np.zeros((6, 6)) if K_A is None else np.asarray(K_A, dtype=float)
    zero6 = np.zeros(6)

    def fstar(frame: str) -> np.ndarray:
        # required net wrench exists only where a body is attached
        if fstar_override is not None:
            return fstar_override.get(frame, zero6)
        if frame not in bodies:
            return zero6
        th = theta_hat.get(frame, bodies[frame].theta)
        g = _gravity_in(chain, world, frame)
        vr = V_r[frame]
        vdr = Vdot_r.get(frame, np.zeros(6)) if Vdot_r else np.zeros(6)
        return regressor(vr, vdr, g) @ th + K_A @ (V_r[frame] - V[frame])

    U = fr["U"]
    F: dict = {}
    F["tool"] = fstar("tool")
    F["D4"] = fstar("D4") + U[("D4", "tool")] @ F["tool"]
    F["C4"] = fstar("C4") + U[("C4", "D4")] @ F["D4"]
    F["A4"] = fstar("A4") + U[("A4", "C4")] @ F["C4"]
    F["B4"] = fstar("B4") + U[("B4", "A4")] @ F["A4"]

    F_L: dict = {}
    child = ("B4", U[(f"next_{EMLA_JOINTS[-1]}", "B4")])
    for name in reversed(EMLA_JOINTS):
        bc, a, tc = f"Bc_{name}", f"A_{name}", f"Tc_{name}"
        c, d = f"C_{name}", f"D_{name}"
        nxt = f"next_{name}"
        child_frame, U_from_next = child
        # subtree wrench carried by the lifted link, expressed at the hinge
        W = fstar(a) + U[(a, tc)] @ (fstar(tc)
                                     + U[(tc, nxt)] @ (U_from_next @ F[child_frame]))
        F[a] = W
        # actuator axial force from the z-moment balance about the hinge
        x, alpha, dx_dq, _ = fr["geom"][name]
        if abs(dx_dq) < 1e-9:
            raise ValueError(f"singular actuator geometry on chain '{name}'")
        F_L[name] = W[5] / dx_dq
        # everything above the chain lands on its base frame; cylinder-side
        # bodies (usually massless) are transported through C and D
        F[bc] = (fstar(bc) + U[(bc, a)] @ W
                 + U[(bc, c)] @ (fstar(c) + U[(c, d)] @ fstar(d)))
        child = (bc, np.eye(6))

    bc0 = f"Bc_{EMLA_JOINTS[0]}"
    F["T1"] = fstar("T1") + U[("T1", bc0)] @ F[bc0]
    F["B1"] = U[("B1", "T1")] @ F["T1"]
    return {"F": F, "F_L": F_L, "tau_base": float(F["T1"][4])}


def chain_statics(chain: ChainModel, zeta) -> dict:
    """Static actuator forces and slew torque at configuration zeta."""
    zeros = {f: np.zeros(6) for f in chain.frames(zeta)["world"]}
    return vdc_dynamics(chain, zeta, zeros, zeros)


def tcp_jacobian(chain: ChainModel, zeta, frames: dict | None = None) -> np.ndarray:
    """6x6 geometric Jacobian mapping joint rates to world TCP [v; w]."""
    fr = frames or chain.frames(zeta)
    world = fr["world"]
    p_tcp = world["tool"].r
    axes = [
        world["T1"].R[:, 1],       # slew: local y
        world["A_lift"].R[:, 2],   # lift: local z
        world["A_tilt"].R[:, 2],   # tilt: local z
        world["A4"].R[:, 0],       # wrist roll: local x
        world["C4"].R[:, 2],       # wrist pitch: local z
        world["D4"].R[:, 0],       # wrist roll 2: local x
    ]
    origins = [world[f].r for f in ("T1", "A_lift", "A_tilt", "A4", "C4", "D4")]
    J = np.zeros((6, 6))
    for i, (z, p) in enumerate(zip(axes, origins)):
        J[:3, i] = np.cross(z, p_tcp - p)
        J[3:, i] = z
    return J


def tcp_position(chain: ChainModel, zeta, frames: dict | None = None) -> np.ndarray:
    fr = frames or chain.frames(zeta)
    return fr["world"]["tool"].r


# ---------------------------------------------------------------------------
# JSON loading


def _body_from_dict(d: dict) -> BodyParams:
    return BodyParams(m=d["m"], com=d["com"], I=d["I"])


def load_chain(path) -> ChainModel:
    """Load a ChainModel from its JSON description."""
    with open(path) as f:
        raw = json.load(f)
    try:
        joints = tuple(
            JointSpec(name=j["name"], limits=tuple(j["limits"]), margin=j["margin"])
            for j in raw["joints"])
        if tuple(j.name for j in joints) != JOINT_NAMES:
            raise ValueError(f"joints must be named {JOINT_NAMES} in order")
        chains = raw["chains"]
        geoms = {n: ClosedChainGeom(hinge=c["hinge"], cyl_base=c["cyl_base"],
                                    rod_attach=c["rod_attach"])
                 for n, c in chains.items()}
        model = ChainModel(
            gravity=np.asarray(raw.get("gravity", [0.0, 0.0, -9.81]), dtype=float),
            joints=joints,
            base_origin=np.asarray(raw["base_origin"], dtype=float),
            chain_offsets={n: np.asarray(c["offset"], dtype=float)
                           for n, c in chains.items()},
            chain_geoms=geoms,
            chain_next={n: np.asarray(c["next"], dtype=float)
                        for n, c in chains.items()},
            wrist_origins=tuple(np.asarray(o, dtype=float)
                                for o in raw["wrist"]["origins"]),
            tool_offset=np.asarray(raw["wrist"]["tool_offset"], dtype=float),
            bodies={n: _body_from_dict(b) for n, b in raw["bodies"].items()},
            payload=float(raw.get("payload", 0.0)),
        )
    except KeyError as e:
        raise ValueError(f"{path}: missing chain-model key {e}") from e
    if set(model.chain_geoms) != set(EMLA_JOINTS):
        raise ValueError(f"{path}: chains must be exactly {EMLA_JOINTS}")
    return model
