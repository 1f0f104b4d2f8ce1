"""Serial-arm kinematics: forward kinematics, Jacobian, damped-least-squares
inverse kinematics, and manipulability.

Joints are revolute and described by the standard four-parameter link
convention (link length a [m], link twist alpha [rad], link offset d [m],
joint angle theta [rad], with an optional fixed theta offset). Quaternions
follow the scipy (x, y, z, w) order.

All functions are pure and operate on immutable model values; they are safe
to call from any thread.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation


class ConfigError(ValueError):
    """Raised when a robot config file violates the documented schema."""


class OutOfReachError(Exception):
    """Raised when IK terminates with error beyond 10x the tolerance."""

    def __init__(self, position_error: float, orientation_error: float):
        self.position_error = position_error
        self.orientation_error = orientation_error
        super().__init__(
            f"target unreachable: residual position error {position_error:.4g} m, "
            f"orientation error {orientation_error:.4g} rad"
        )


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: link geometry plus limits and lumped dynamics."""

    a: float                      # link length (m)
    alpha: float                  # link twist (rad)
    d: float                      # link offset (m)
    theta_offset: float = 0.0     # fixed offset added to the joint angle (rad)
    limits: tuple[float, float] = (-math.pi, math.pi)
    vel_limit: float = 1.0        # rad/s
    inertia: float = 1.0          # kg m^2, lumped per joint
    damping: float = 0.0          # N m s/rad

    def __post_init__(self):
        lo, hi = self.limits
        if not lo < hi:
            raise ConfigError(f"joint limits must satisfy min < max, got {self.limits}")
        if self.vel_limit <= 0:
            raise ConfigError(f"vel_limit must be > 0, got {self.vel_limit}")
        if self.inertia <= 0:
            raise ConfigError(f"inertia must be > 0, got {self.inertia}")
        if self.damping < 0:
            raise ConfigError(f"damping must be >= 0, got {self.damping}")


@dataclass(frozen=True)
class RobotModel:
    """Kinematic/dynamic description of a serial arm plus named preset postures."""

    name: str
    joints: tuple[JointSpec, ...]
    gripper_range: tuple[float, float] = (0.0, 1.0)
    presets: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ConfigError("a robot model needs at least one joint")
        for name, vec in self.presets.items():
            if len(vec) != self.n_joints:
                raise ConfigError(
                    f"preset {name!r} has {len(vec)} values, expected {self.n_joints}"
                )
            for i, v in enumerate(vec):
                lo, hi = self.joints[i].limits
                if not (lo <= v <= hi):
                    raise ConfigError(
                        f"preset {name!r} joint {i} value {v} outside limits [{lo}, {hi}]"
                    )

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def limits_low(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def limits_high(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    @property
    def vel_limits(self) -> np.ndarray:
        return np.array([j.vel_limit for j in self.joints])

    @property
    def inertias(self) -> np.ndarray:
        return np.array([j.inertia for j in self.joints])

    @property
    def dampings(self) -> np.ndarray:
        return np.array([j.damping for j in self.joints])

    def preset(self, name: str) -> np.ndarray:
        if name not in self.presets:
            raise KeyError(f"unknown preset {name!r}; available: {sorted(self.presets)}")
        return np.array(self.presets[name], dtype=float)

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.limits_low, self.limits_high)

    def to_dict(self) -> dict:
        """JSON-ready description (used by the wire protocol and config export)."""
        return {
            "name": self.name,
            "gripper_range": list(self.gripper_range),
            "joints": [
                {
                    "a": j.a,
                    "alpha": j.alpha,
                    "d": j.d,
                    "theta_offset": j.theta_offset,
                    "limits": list(j.limits),
                    "vel_limit": j.vel_limit,
                    "inertia": j.inertia,
                    "damping": j.damping,
                }
                for j in self.joints
            ],
            "presets": {k: list(v) for k, v in self.presets.items()},
        }


@dataclass(frozen=True)
class Pose:
    """End-effector pose: position (m) and unit quaternion (x, y, z, w)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.orientation.shape != (4,):
            raise ValueError("orientation must be a quaternion (x, y, z, w)")
        n = float(np.linalg.norm(self.orientation))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm must be 1 +/- 1e-9, got {n}")

    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.orientation)

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "orientation": self.orientation.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.array(d["position"], float), np.array(d["orientation"], float))


@dataclass(frozen=True)
class IkOptions:
    pos_tol: float = 1e-4        # m
    rot_tol: float = 1e-3        # rad
    max_iters: int = 200
    damping: float = 0.05        # DLS lambda
    max_step: float = 0.5        # per-iteration joint-step cap (rad)
    position_only: bool = False  # ignore orientation (3-row objective)


@dataclass(frozen=True)
class IkResult:
    solution: np.ndarray
    position_error: float
    orientation_error: float
    iterations: int
    converged: bool


def check_joint_vector(model: RobotModel, q: Sequence[float]) -> np.ndarray:
    """Coerce q to a float array and validate length/finiteness."""
    arr = np.asarray(q, dtype=float)
    if arr.shape != (model.n_joints,):
        raise ValueError(f"expected {model.n_joints} joint values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("joint vector contains non-finite values")
    return arr


def _link_transform(joint: JointSpec, theta: float) -> np.ndarray:
    # Rz(theta) * Tz(d) * Tx(a) * Rx(alpha)
    ct, st = math.cos(theta + joint.theta_offset), math.sin(theta + joint.theta_offset)
    ca, sa = math.cos(joint.alpha), math.sin(joint.alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, joint.a * ct],
            [st, ct * ca, -ct * sa, joint.a * st],
            [0.0, sa, ca, joint.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def link_transforms(model: RobotModel, q: Sequence[float]) -> list[np.ndarray]:
    """Cumulative 4x4 frames [base, joint1, ..., jointN] in the base frame."""
    q = check_joint_vector(model, q)
    frames = [np.eye(4)]
    T = np.eye(4)
    for joint, theta in zip(model.joints, q):
        T = T @ _link_transform(joint, float(theta))
        frames.append(T.copy())
    return frames


def forward_kinematics(model: RobotModel, q: Sequence[float]) -> Pose:
    """Pose of the end-effector frame in the base frame."""
    T = link_transforms(model, q)[-1]
    quat = Rotation.from_matrix(T[:3, :3]).as_quat()
    return Pose(T[:3, 3], quat)


def jacobian(model: RobotModel, q: Sequence[float]) -> np.ndarray:
    """Geometric Jacobian, 6xN: rows 0..2 linear (m/rad), rows 3..5 angular."""
    frames = link_transforms(model, q)
    tip = frames[-1][:3, 3]
    J = np.zeros((6, model.n_joints))
    for i in range(model.n_joints):
        z = frames[i][:3, 2]
        o = frames[i][:3, 3]
        J[:3, i] = np.cross(z, tip - o)
        J[3:, i] = z
    return J


def manipulability_from_jacobian(J: np.ndarray, n_joints: int) -> float:
    """Yoshikawa measure: product of singular values of the active block.

    For arms with fewer than six joints only the position rows count; the
    singular-value product equals sqrt(det) of the Gram matrix on its
    smaller side, which stays meaningful when the block is rank-deficient
    by shape alone.
    """
    block = J[:3, :] if n_joints < 6 else J
    sv = np.linalg.svd(block, compute_uv=False)
    k = min(block.shape)
    return float(np.prod(sv[:k]))


def manipulability(model: RobotModel, q: Sequence[float]) -> float:
    """Distance-from-singularity measure, >= 0; 0 at singular configurations."""
    return manipulability_from_jacobian(jacobian(model, q), model.n_joints)


def orientation_error(target: Pose, current: Pose) -> np.ndarray:
    """Rotation-vector error taking current to target, expressed in base frame."""
    r_err = target.rotation() * current.rotation().inv()
    return r_err.as_rotvec()


def damped_pinv(J: np.ndarray, lam: float) -> np.ndarray:
    """J^T (J J^T + lam^2 I)^-1; falls back to the exact pseudo-inverse at lam=0."""
    if lam == 0.0:
        return np.linalg.pinv(J)
    m = J.shape[0]
    return J.T @ np.linalg.solve(J @ J.T + lam**2 * np.eye(m), np.eye(m))


def inverse_kinematics(
    model: RobotModel,
    target: Pose,
    seed: Sequence[float],
    opts: Optional[IkOptions] = None,
) -> IkResult:
    """Iterative damped-least-squares IK with per-step joint-limit clamping.

    Raises OutOfReachError when the residual after the iteration cap exceeds
    10x the corresponding tolerance.
    """
    opts = opts or IkOptions()
    q = check_joint_vector(model, seed)
    low, high = model.limits_low, model.limits_high
    if np.any(q < low) or np.any(q > high):
        raise ValueError("IK seed must lie within joint limits")
    q = q.copy()

    best_q = q.copy()
    best_pos = math.inf
    best_rot = math.inf

    for it in range(opts.max_iters + 1):
        pose = forward_kinematics(model, q)
        e_pos = target.position - pose.position
        e_rot = orientation_error(target, pose)
        pos_err = float(np.linalg.norm(e_pos))
        rot_err = float(np.linalg.norm(e_rot))

        score = pos_err + (0.0 if opts.position_only else rot_err)
        if score < best_pos + (0.0 if opts.position_only else best_rot):
            best_q, best_pos, best_rot = q.copy(), pos_err, rot_err

        converged = pos_err <= opts.pos_tol and (
            opts.position_only or rot_err <= opts.rot_tol
        )
        if converged:
            return IkResult(q, pos_err, rot_err, it, True)
        if it == opts.max_iters:
            break

        J = jacobian(model, q)
        if opts.position_only:
            J = J[:3, :]
            e = e_pos
        else:
            e = np.concatenate([e_pos, e_rot])
        dq = damped_pinv(J, opts.damping) @ e
        step = float(np.max(np.abs(dq)))
        if step > opts.max_step:
            dq *= opts.max_step / step
        q = np.clip(q + dq, low, high)

    if best_pos > 10 * opts.pos_tol or (
        not opts.position_only and best_rot > 10 * opts.rot_tol
    ):
        raise OutOfReachError(best_pos, best_rot)
    return IkResult(best_q, best_pos, best_rot, opts.max_iters, False)


def load_robot_model(source: str | Path | dict) -> RobotModel:
    """Build a RobotModel from a config dict, a JSON file path, or a JSON string.

    Schema: {"name", "gripper_range"?, "joints": [{"a", "alpha", "d",
    "theta_offset"?, "limits", "vel_limit", "inertia", "damping"}],
    "presets"?: {name: [rad, ...]}}.
    """
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        if path.exists():
            data = json.loads(path.read_text())
        else:
            try:
                data = json.loads(str(source))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"robot config not found or not JSON: {source}") from exc
    try:
        joints = tuple(
            JointSpec(
                a=float(j["a"]),
                alpha=float(j["alpha"]),
                d=float(j["d"]),
                theta_offset=float(j.get("theta_offset", 0.0)),
                limits=(float(j["limits"][0]), float(j["limits"][1])),
                vel_limit=float(j["vel_limit"]),
                inertia=float(j["inertia"]),
                damping=float(j["damping"]),
            )
            for j in data["joints"]
        )
        gripper_range = tuple(data.get("gripper_range", (0.0, 1.0)))
        presets = {k: tuple(float(x) for x in v) for k, v in data.get("presets", {}).items()}
        return RobotModel(
            name=str(data["name"]),
            joints=joints,
            gripper_range=(float(gripper_range[0]), float(gripper_range[1])),
            presets=presets,
        )
    except KeyError as exc:
        raise ConfigError(f"robot config missing required field: {exc}") from exc
