"""Deterministic floating-base quadruped physics.

The base is a rigid body; the twelve joints drive kinematic (massless) legs
with per-joint reflected inertia. Ground reaction forces from spring-damper
foot/knee contacts are routed to the base directly and to the joints through
the leg Jacobian transpose. Everything here is a pure function of its inputs:
no global state, no hidden RNG.

Leg order everywhere: FR, FL, RR, RL; joint order per leg: HAA, HFE, KFE.
Quaternions are (w, x, y, z), body-to-world. Zero joint angle means the leg
points straight down.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .terrain import Heightfield, heights_at

GRAVITY = 9.81

# y-axis sign per leg (right legs negative): FR, FL, RR, RL
LEG_Y_SIGN = np.array([-1.0, 1.0, -1.0, 1.0])

KNEE_SPHERE_RADIUS = 0.04
DIVERGENCE_LIMIT = 1.0e6


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n <= 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix mapping body-frame vectors to world frame."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def integrate_orientation(quat: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """Exact exponential-map update for body-frame angular velocity."""
    if not (np.all(np.isfinite(quat)) and np.all(np.isfinite(omega_body)) and np.isfinite(dt)):
        raise FloatingPointError("non-finite input to integrate_orientation")
    angle = float(np.linalg.norm(omega_body)) * dt
    if angle < 1e-12:
        return quat_normalize(quat)
    axis = omega_body / np.linalg.norm(omega_body)
    half = 0.5 * angle
    dq = np.array([np.cos(half), *(np.sin(half) * axis)])
    return quat_normalize(quat_mul(quat, dq))


# ---------------------------------------------------------------------------
# model and state
# ---------------------------------------------------------------------------

@dataclass
class RobotModel:
    """Kinematic and inertial description of the robot."""

    base_mass: float = 10.8
    base_inertia: np.ndarray = field(default_factory=lambda: np.diag([0.07, 0.26, 0.28]))
    hip_offsets: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [0.20, -0.049, 0.0],   # FR
                [0.20, 0.049, 0.0],    # FL
                [-0.20, -0.049, 0.0],  # RR
                [-0.20, 0.049, 0.0],   # RL
            ]
        )
    )
    link_lengths: tuple = (0.062, 0.209, 0.195)  # abduction offset, thigh, shank
    foot_radius: float = 0.008
    joint_reflected_inertia: np.ndarray = field(default_factory=lambda: np.full(12, 0.012))
    joint_friction_torque: np.ndarray = field(default_factory=lambda: np.zeros(12))
    torque_limit: float = 17.0
    q_nominal: np.ndarray = field(default_factory=lambda: np.tile([0.0, -0.8, 1.6], 4))
    base_box_half_extents: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.10, 0.05]))

    def validate(self) -> None:
        assert self.base_mass > 0 and self.foot_radius > 0
        assert np.all(np.array(self.link_lengths) > 0)
        assert np.all(self.joint_reflected_inertia > 0)
        assert np.allclose(self.base_inertia, self.base_inertia.T)
        assert np.all(np.linalg.eigvalsh(self.base_inertia) > 0)

    def with_foot_radius(self, r: float) -> "RobotModel":
        return replace(self, foot_radius=r)


@dataclass
class PdGains:
    kp: float = 17.0
    kd: float = 0.4


@dataclass
class RobotState:
    """Full simulator truth for one robot."""

    base_position: np.ndarray
    base_quaternion: np.ndarray
    base_lin_vel: np.ndarray   # world frame
    base_ang_vel: np.ndarray   # body frame
    q: np.ndarray
    qd: np.ndarray
    contact: np.ndarray        # 4 bools, feet only
    time: float = 0.0
    diverged: bool = False

    def copy(self) -> "RobotState":
        return RobotState(
            base_position=self.base_position.copy(),
            base_quaternion=self.base_quaternion.copy(),
            base_lin_vel=self.base_lin_vel.copy(),
            base_ang_vel=self.base_ang_vel.copy(),
            q=self.q.copy(),
            qd=self.qd.copy(),
            contact=self.contact.copy(),
            time=self.time,
            diverged=self.diverged,
        )


def nominal_state(model: RobotModel, base_height: float = 0.30) -> RobotState:
    return RobotState(
        base_position=np.array([0.0, 0.0, base_height]),
        base_quaternion=np.array([1.0, 0.0, 0.0, 0.0]),
        base_lin_vel=np.zeros(3),
        base_ang_vel=np.zeros(3),
        q=model.q_nominal.copy(),
        qd=np.zeros(12),
        contact=np.zeros(4, dtype=bool),
    )


# ---------------------------------------------------------------------------
# leg kinematics (vectorized over the four legs)
# ---------------------------------------------------------------------------

def foot_positions_body(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Foot-center positions in the body frame, shape (4, 3)."""
    d, lt, ls = model.link_lengths
    qq = np.asarray(q, dtype=float).reshape(4, 3)
    s1, c1 = np.sin(qq[:, 0]), np.cos(qq[:, 0])
    s2, c2 = np.sin(qq[:, 1]), np.cos(qq[:, 1])
    s3, c3 = np.sin(qq[:, 2]), np.cos(qq[:, 2])

    # leg-plane vector from HFE to foot, rotated by HFE pitch
    v2x = -ls * s3
    v2z = -lt - ls * c3
    ux = v2x * c2 + v2z * s2
    uz = -v2x * s2 + v2z * c2

    wy = LEG_Y_SIGN * d
    p = np.empty((4, 3))
    p[:, 0] = ux
    p[:, 1] = wy * c1 - uz * s1
    p[:, 2] = wy * s1 + uz * c1
    return model.hip_offsets + p


def foot_jacobians_body(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Per-leg Jacobians d(foot_body)/d(q_leg), shape (4, 3, 3)."""
    d, lt, ls = model.link_lengths
    qq = np.asarray(q, dtype=float).reshape(4, 3)
    s1, c1 = np.sin(qq[:, 0]), np.cos(qq[:, 0])
    s2, c2 = np.sin(qq[:, 1]), np.cos(qq[:, 1])
    s3, c3 = np.sin(qq[:, 2]), np.cos(qq[:, 2])

    v2x = -ls * s3
    v2z = -lt - ls * c3
    ux = v2x * c2 + v2z * s2
    uz = -v2x * s2 + v2z * c2
    wy = LEG_Y_SIGN * d

    J = np.empty((4, 3, 3))
    # d/dq1: Rx(q1) @ (e_x x w), w = (ux, wy, uz)
    J[:, 0, 0] = 0.0
    J[:, 1, 0] = -uz * c1 - wy * s1
    J[:, 2, 0] = -uz * s1 + wy * c1
    # d/dq2: Rx(q1) @ Ry(q2) @ (e_y x v2), e_y x v2 = (v2z, 0, -v2x)
    ax = v2z * c2 - v2x * s2
    az = -v2z * s2 - v2x * c2
    J[:, 0, 1] = ax
    J[:, 1, 1] = -az * s1
    J[:, 2, 1] = az * c1
    # d/dq3: Rx(q1) @ Ry(q2) @ Ry(q3) @ (e_y x (0,0,-ls)) = ... @ (-ls*c3, 0, ls*s3)
    bx = -ls * c3
    bz = ls * s3
    rx = bx * c2 + bz * s2
    rz = -bx * s2 + bz * c2
    J[:, 0, 2] = rx
    J[:, 1, 2] = -rz * s1
    J[:, 2, 2] = rz * c1
    return J


def knee_positions_body(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """HFE-KFE elbow positions in the body frame, shape (4, 3)."""
    d, lt, _ = model.link_lengths
    qq = np.asarray(q, dtype=float).reshape(4, 3)
    s1, c1 = np.sin(qq[:, 0]), np.cos(qq[:, 0])
    s2, c2 = np.sin(qq[:, 1]), np.cos(qq[:, 1])
    ux = -lt * s2
    uz = -lt * c2
    wy = LEG_Y_SIGN * d
    p = np.empty((4, 3))
    p[:, 0] = ux
    p[:, 1] = wy * c1 - uz * s1
    p[:, 2] = wy * s1 + uz * c1
    return model.hip_offsets + p


def leg_forward_kinematics(model: RobotModel, leg_index: int, q_leg: np.ndarray) -> np.ndarray:
    """Foot center in the body frame for one leg."""
    if not 0 <= leg_index < 4:
        raise IndexError(f"leg_index {leg_index} out of range")
    q = np.zeros(12)
    q[3 * leg_index : 3 * leg_index + 3] = q_leg
    return foot_positions_body(model, q)[leg_index]


def foot_jacobian(model: RobotModel, leg_index: int, q_leg: np.ndarray) -> np.ndarray:
    """d(foot position)/d(q_leg) in the body frame, 3x3."""
    if not 0 <= leg_index < 4:
        raise IndexError(f"leg_index {leg_index} out of range")
    q = np.zeros(12)
    q[3 * leg_index : 3 * leg_index + 3] = q_leg
    return foot_jacobians_body(model, q)[leg_index]


# ---------------------------------------------------------------------------
# actuation and contact
# ---------------------------------------------------------------------------

def pd_torque(gains: PdGains, q_des, q, qd, torque_limit: float):
    """Joint torque toward a position target with zero desired velocity."""
    tau = gains.kp * (np.asarray(q_des) - np.asarray(q)) - gains.kd * np.asarray(qd)
    return np.clip(tau, -torque_limit, torque_limit)


@dataclass
class ContactParams:
    # normal spring chosen so the worst-loaded standing foot penetrates < 5 mm
    k_normal: float = 10000.0
    d_normal: float = 100.0
    k_tangent: float = 4000.0


@dataclass
class ContactCache:
    """Stiction anchors for the 8 contact spheres (4 feet, then 4 knees)."""

    anchors: np.ndarray = field(default_factory=lambda: np.zeros((8, 3)))
    active: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=bool))

    def copy(self) -> "ContactCache":
        return ContactCache(self.anchors.copy(), self.active.copy())


def contact_force(
    foot_pos_w: np.ndarray,
    foot_vel_w: np.ndarray,
    terrain: Heightfield,
    mu: float,
    anchor,
    radius: float = 0.008,
    params: ContactParams = ContactParams(),
):
    """Spring-damper normal force plus anchored Coulomb stiction.

    `anchor` is the previous stick point (or None). Returns
    (force_world, in_contact, new_anchor).
    """
    h, normal = terrain.height_at(foot_pos_w[0], foot_pos_w[1])
    gap = h + radius - foot_pos_w[2]
    penetration = gap * normal[2]
    if penetration <= 0.0:
        return np.zeros(3), False, None

    v_n = float(np.dot(foot_vel_w, normal))
    f_n = params.k_normal * penetration - params.d_normal * v_n
    if f_n <= 0.0:
        return np.zeros(3), False, None

    if anchor is None:
        anchor = foot_pos_w.copy()
    disp = foot_pos_w - anchor
    disp_t = disp - normal * np.dot(disp, normal)
    f_t = -params.k_tangent * disp_t
    f_t_mag = float(np.linalg.norm(f_t))
    limit = mu * f_n
    if f_t_mag > limit:
        f_t *= limit / f_t_mag
        # sliding: re-project the anchor onto the friction-cone boundary
        anchor = foot_pos_w + f_t / params.k_tangent
    force = normal * f_n + f_t
    return force, True, anchor


def _contact_forces_vec(
    pos_w: np.ndarray,
    vel_w: np.ndarray,
    radii: np.ndarray,
    terrain: Heightfield,
    mu: float,
    cache: ContactCache,
    params: ContactParams,
):
    """Vectorized contact_force over n points; mutates `cache` in place.

    Returns (forces (n,3), in_contact (n,), max tangential overshoot).
    """
    n = pos_w.shape[0]
    hs, normals = heights_at(terrain, pos_w[:, 0], pos_w[:, 1])
    pen = (hs + radii - pos_w[:, 2]) * normals[:, 2]
    v_n = np.einsum("ij,ij->i", vel_w, normals)
    f_n = params.k_normal * pen - params.d_normal * v_n
    touching = (pen > 0.0) & (f_n > 0.0)
    f_n = np.where(touching, f_n, 0.0)

    fresh = touching & ~cache.active
    cache.anchors[fresh] = pos_w[fresh]
    disp = pos_w - cache.anchors
    disp_t = disp - normals * np.einsum("ij,ij->i", disp, normals)[:, None]
    f_t = np.where(touching[:, None], -params.k_tangent * disp_t, 0.0)
    f_t_mag = np.linalg.norm(f_t, axis=1)
    limit = mu * f_n
    slide = touching & (f_t_mag > limit)
    if np.any(slide):
        scale = limit[slide] / f_t_mag[slide]
        f_t[slide] *= scale[:, None]
        cache.anchors[slide] = pos_w[slide] + f_t[slide] / params.k_tangent
    forces = np.where(touching[:, None], normals * f_n[:, None] + f_t, 0.0)
    cache.active[:] = touching
    overshoot = float(np.max(np.linalg.norm(f_t, axis=1) - limit, initial=-np.inf))
    return forces, touching[:n], overshoot


# ---------------------------------------------------------------------------
# stepper
# ---------------------------------------------------------------------------

@dataclass
class StepInfo:
    tau_mean: np.ndarray          # mean applied joint torque over the substeps
    foot_forces: np.ndarray       # world-frame forces at the final substep, (4,3)
    foot_pos_w: np.ndarray        # (4,3) at the end of the step
    foot_vel_w: np.ndarray        # (4,3) at the end of the step
    cone_overshoot: float         # max ||f_t|| - mu*f_n seen during the step
    diverged: bool


def step_physics(
    state: RobotState,
    model: RobotModel,
    gains: PdGains,
    q_des: np.ndarray,
    terrain: Heightfield,
    mu: float,
    dt_control: float = 0.01,
    n_substeps: int = 8,
    contact_cache: ContactCache | None = None,
    joint_friction: np.ndarray | None = None,
    contact_params: ContactParams = ContactParams(),
):
    """Advance the robot by one control period.

    Returns (new_state, contact_cache, StepInfo). The caller owns the
    contact cache and must pass it back in on the next step to preserve
    stiction anchors.
    """
    assert n_substeps >= 4
    if contact_cache is None:
        contact_cache = ContactCache()
    else:
        contact_cache = contact_cache.copy()
    if joint_friction is None:
        joint_friction = model.joint_friction_torque

    dt = dt_control / n_substeps
    pos = state.base_position.copy()
    quat = state.base_quaternion.copy()
    vel = state.base_lin_vel.copy()
    omega = state.base_ang_vel.copy()
    q = state.q.copy()
    qd = state.qd.copy()
    inv_inertia = np.linalg.inv(model.base_inertia)
    inv_refl = 1.0 / model.joint_reflected_inertia
    radii = np.concatenate([np.full(4, model.foot_radius), np.full(4, KNEE_SPHERE_RADIUS)])
    gravity = np.array([0.0, 0.0, -GRAVITY])

    tau_accum = np.zeros(12)
    cone_overshoot = -np.inf
    foot_contact = np.zeros(4, dtype=bool)
    foot_forces = np.zeros((4, 3))
    p_feet_w = np.zeros((4, 3))
    v_feet_w = np.zeros((4, 3))

    for _ in range(n_substeps):
        R = quat_to_matrix(quat)
        p_feet_b = foot_positions_body(model, q)
        p_knees_b = knee_positions_body(model, q)
        J = foot_jacobians_body(model, q)
        points_b = np.vstack([p_feet_b, p_knees_b])

        # world-frame point kinematics; knee velocities ignore joint motion
        # (base contribution dominates and knees are a safety contact only)
        qd_leg = qd.reshape(4, 3)
        v_feet_b = np.einsum("lij,lj->li", J, qd_leg)
        v_points_b = np.vstack([v_feet_b, np.zeros((4, 3))])
        v_points_b += np.cross(omega, points_b)
        points_w = pos + points_b @ R.T
        v_points_w = vel + v_points_b @ R.T

        forces_w, touching, overshoot = _contact_forces_vec(
            points_w, v_points_w, radii, terrain, mu, contact_cache, contact_params
        )
        cone_overshoot = max(cone_overshoot, overshoot)

        # joints: PD torque, dry friction, foot contact load via J^T
        tau = pd_torque(gains, q_des, q, qd, model.torque_limit)
        tau_fric = joint_friction * np.clip(qd / 0.05, -1.0, 1.0)
        f_feet_b = forces_w[:4] @ R
        tau_contact = np.einsum("lji,lj->li", J, f_feet_b).reshape(12)
        qdd = (tau - tau_fric + tau_contact) * inv_refl
        qd = qd + dt * qdd
        q = q + dt * qd
        over = np.abs(q) > 2.0 * np.pi
        if np.any(over):
            q = np.clip(q, -2.0 * np.pi, 2.0 * np.pi)
            qd = np.where(over, 0.0, qd)

        # base: Newton-Euler with all contact wrenches, semi-implicit Euler
        total_force = gravity * model.base_mass + forces_w.sum(axis=0)
        forces_b = forces_w @ R
        torque_b = np.cross(points_b, forces_b).sum(axis=0)
        vel = vel + dt * total_force / model.base_mass
        pos = pos + dt * vel
        omega_dot = inv_inertia @ (torque_b - np.cross(omega, model.base_inertia @ omega))
        omega = omega + dt * omega_dot
        quat = integrate_orientation(quat, omega, dt)

        tau_accum += tau
        foot_contact = touching[:4].copy()
        foot_forces = forces_w[:4].copy()
        p_feet_w = points_w[:4].copy()
        v_feet_w = v_points_w[:4].copy()

    diverged = not (
        np.all(np.isfinite(pos))
        and np.all(np.isfinite(vel))
        and np.all(np.isfinite(q))
        and np.all(np.isfinite(qd))
        and np.max(np.abs(pos)) < DIVERGENCE_LIMIT
        and np.max(np.abs(vel)) < DIVERGENCE_LIMIT
        and np.max(np.abs(qd)) < DIVERGENCE_LIMIT
    )

    new_state = RobotState(
        base_position=pos,
        base_quaternion=quat,
        base_lin_vel=vel,
        base_ang_vel=omega,
        q=q,
        qd=qd,
        contact=foot_contact,
        time=state.time + dt_control,
        diverged=diverged,
    )
    info = StepInfo(
        tau_mean=tau_accum / n_substeps,
        foot_forces=foot_forces,
        foot_pos_w=p_feet_w,
        foot_vel_w=v_feet_w,
        cone_overshoot=cone_overshoot,
        diverged=diverged,
    )
    return new_state, contact_cache, info
