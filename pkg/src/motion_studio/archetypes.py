"""Synthetic motion archetypes with known effort-quality labels.

Each generator designs an end-effector path with the target qualities, tracks
it with position-only IK on the shipped 3-DOF articulated model and returns
the joint log together with the tonality labels the classifier is expected to
reproduce at default thresholds. They double as calibration fixtures for the
metric defaults.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .arm_model import IkOptions, RobotModel, inverse_kinematics, Pose
from .resources import builtin_model
from .sim_exec import minimum_jerk_shape
from .trajectory_log import TrajectoryLog

ARCHETYPES = ("gentle-direct", "darting", "collapsing-heavy")

_IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


@dataclass(frozen=True)
class _Leg:
    p0: np.ndarray
    p1: np.ndarray
    duration: float


def _piecewise(legs: list[_Leg]) -> tuple[float, Callable[[float], np.ndarray]]:
    starts = np.cumsum([0.0] + [leg.duration for leg in legs])
    total = float(starts[-1])

    def position(t: float) -> np.ndarray:
        t = min(max(t, 0.0), total)
        i = int(np.searchsorted(starts[1:], t, side="left"))
        i = min(i, len(legs) - 1)
        leg = legs[i]
        s = (t - starts[i]) / leg.duration
        shape, _ = minimum_jerk_shape(s)
        return leg.p0 + (leg.p1 - leg.p0) * shape

    return total, position


def _hold(p: np.ndarray, duration: float) -> _Leg:
    return _Leg(p, p, duration)


def _track(
    model: RobotModel,
    path: Callable[[float], np.ndarray],
    duration: float,
    rate: float,
    seed: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate
    q = np.zeros((n, model.n_joints))
    opts = IkOptions(position_only=True, pos_tol=1e-6, max_iters=120)
    q_prev = np.asarray(seed, dtype=float)
    for i, ti in enumerate(t):
        target = Pose(path(float(ti)), _IDENTITY_QUAT)
        result = inverse_kinematics(model, target, q_prev, opts)
        q[i] = result.solution
        q_prev = result.solution
    return t, q


def _log_from_joints(
    t: np.ndarray, q: np.ndarray, rate: float, model: RobotModel, name: str
) -> TrajectoryLog:
    qd = np.gradient(q, 1.0 / rate, axis=0)
    return TrajectoryLog(
        rate=rate,
        t=t,
        q_ref=q.copy(),
        q_actual=q,
        qd_actual=qd,
        gripper=np.zeros(len(t)),
        metadata={
            "archetype": name,
            "model": model.name,
            "model_def": model.to_dict(),
            "kind": "synthetic",
        },
    )


def _seed_for(model: RobotModel, point: np.ndarray) -> np.ndarray:
    result = inverse_kinematics(
        model,
        Pose(point, _IDENTITY_QUAT),
        np.array([0.0, 0.6, -1.1]),
        IkOptions(position_only=True, pos_tol=1e-6, max_iters=200),
    )
    return result.solution


def generate_archetype(
    name: str, rate: float = 100.0, model: Optional[RobotModel] = None
) -> tuple[TrajectoryLog, dict]:
    """Build one labelled synthetic trajectory.

    Returns the joint-space log and a dict of the tonality labels the
    generator was designed to exhibit (only the dimensions it pins down).
    """
    if model is None:
        model = builtin_model("articulated3")
    if name == "gentle-direct":
        # One slow, straight, smooth point-to-point reach.
        p0 = np.array([0.90, -0.15, 0.45])
        p1 = np.array([0.65, 0.25, 0.75])
        legs = [_Leg(p0, p1, 3.0)]
        labels = {
            "spatial": "unidirectional",
            "temporal": "neutral",
            "weight": "light",
            "flow": "unhindered",
        }
    elif name == "darting":
        # Fast zig-zag dashes that return near the start point.
        c = np.array([0.80, 0.00, 0.55])
        offsets = [
            np.array([0.15, 0.08, 0.02]),
            np.array([-0.10, -0.12, 0.06]),
            np.array([0.12, -0.05, -0.07]),
            np.array([-0.13, 0.10, 0.04]),
            np.array([0.0, 0.0, 0.0]),
        ]
        points = [c] + [c + o for o in offsets]
        legs = [_Leg(points[i], points[i + 1], 0.18) for i in range(len(points) - 1)]
        labels = {
            "spatial": "multidirectional",
            "weight": "strong",
            "flow": "controlled",
        }
    elif name == "collapsing-heavy":
        # Staccato stairs straight down: slow enough to stay out of "strong",
        # jerky enough to read as bound flow, with a dominant net drop.
        top = np.array([0.85, 0.0, 0.85])
        drop = np.array([0.0, 0.0, -0.10])
        sway = np.array([0.005, 0.0, 0.0])
        legs = []
        p = top
        for k in range(5):
            nxt = p + drop + (sway if k % 2 == 0 else -sway)
            legs.append(_Leg(p, nxt, 0.35))
            legs.append(_hold(nxt, 0.2))
            p = nxt
        labels = {"weight": "heavy"}
    else:
        raise ValueError(f"unknown archetype {name!r}; choose from {ARCHETYPES}")

    duration, path = _piecewise(legs)
    seed = _seed_for(model, legs[0].p0)
    t, q = _track(model, path, duration, rate, seed)
    return _log_from_joints(t, q, rate, model, name), labels
