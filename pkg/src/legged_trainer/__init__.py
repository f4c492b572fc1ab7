"""Concurrent locomotion-policy and state-estimator training at desk scale."""

from .simcore import (
    ContactCache,
    ContactParams,
    PdGains,
    RobotModel,
    RobotState,
    contact_force,
    foot_jacobian,
    integrate_orientation,
    leg_forward_kinematics,
    nominal_state,
    pd_torque,
    step_physics,
)
from .terrain import Heightfield, generate_terrain, rough_z_scale

__all__ = [
    "ContactCache",
    "ContactParams",
    "PdGains",
    "RobotModel",
    "RobotState",
    "Heightfield",
    "contact_force",
    "foot_jacobian",
    "generate_terrain",
    "integrate_orientation",
    "leg_forward_kinematics",
    "nominal_state",
    "pd_torque",
    "rough_z_scale",
    "step_physics",
]
