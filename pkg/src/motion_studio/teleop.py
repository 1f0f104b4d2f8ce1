"""Deterministic teleoperation state machine: dual-mode (joint/Cartesian)
velocity control, speed scaling, joint selection, first-order inertia
smoothing, preset recall and latched fault handling.

All transitions are pure functions over immutable state so that identical
event streams always reproduce identical trajectories. The owning runtime
applies them serially on the simulation thread.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence as Seq

import numpy as np

from .arm_model import RobotModel, damped_pinv, jacobian, manipulability

log = logging.getLogger(__name__)

AXIS_ACTIONS = (
    "joint_drive",
    "cart_x",
    "cart_y",
    "cart_z",
    "cart_rx",
    "cart_ry",
    "cart_rz",
)
BUTTON_ACTIONS = (
    "mode_toggle",
    "speed_up",
    "speed_down",
    "joint_next",
    "joint_prev",
    "inertia_toggle",
    "fault_clear",
    "gripper_open",
    "gripper_close",
)
PRESET_PREFIX = "preset:"


class ControlMode(enum.Enum):
    JOINT = "joint"
    CARTESIAN = "cartesian"


class FaultKind(enum.Enum):
    NEAR_SINGULARITY = "near_singularity"
    JOINT_LIMIT = "joint_limit"
    COMMAND_TIMEOUT = "command_timeout"


class EventKind(enum.Enum):
    AXIS = "axis"
    PRESS = "press"
    RELEASE = "release"


@dataclass(frozen=True)
class InputEvent:
    kind: EventKind
    id: str
    value: float = 0.0
    t: float = 0.0

    @staticmethod
    def axis_move(axis_id: str, value: float, t: float = 0.0) -> "InputEvent":
        return InputEvent(EventKind.AXIS, axis_id, value, t)

    @staticmethod
    def button_press(button_id: str, t: float = 0.0) -> "InputEvent":
        return InputEvent(EventKind.PRESS, button_id, 0.0, t)

    @staticmethod
    def button_release(button_id: str, t: float = 0.0) -> "InputEvent":
        return InputEvent(EventKind.RELEASE, button_id, 0.0, t)

    def to_dict(self) -> dict:
        d = {"t": self.t, "kind": self.kind.value, "id": self.id}
        if self.kind is EventKind.AXIS:
            d["value"] = self.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "InputEvent":
        return InputEvent(
            kind=EventKind(d["kind"]),
            id=str(d["id"]),
            value=float(d.get("value", 0.0)),
            t=float(d["t"]),
        )


class BindingError(ValueError):
    """Unknown action name in a binding map file."""


@dataclass(frozen=True)
class BindingMap:
    """Maps raw axis/button ids to semantic actions."""

    bindings: dict  # id -> action

    def __post_init__(self):
        for key, action in self.bindings.items():
            if action in AXIS_ACTIONS or action in BUTTON_ACTIONS:
                continue
            if action.startswith(PRESET_PREFIX) and len(action) > len(PRESET_PREFIX):
                continue
            raise BindingError(
                f"binding {key!r}: unknown action {action!r}; expected one of "
                f"{AXIS_ACTIONS + BUTTON_ACTIONS} or '{PRESET_PREFIX}<name>'"
            )

    def action_for(self, event_id: str) -> Optional[str]:
        return self.bindings.get(event_id)

    @staticmethod
    def load(path: str | Path) -> "BindingMap":
        return BindingMap(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dict(self.bindings)


@dataclass(frozen=True)
class TeleopConfig:
    singularity_threshold: float = 1e-3
    cart_lin_speed: float = 0.5   # m/s at full stick and scale 1
    cart_ang_speed: float = 1.0   # rad/s at full stick and scale 1
    speed_step: float = 0.1
    gripper_step: float = 0.1
    command_timeout: float = 2.0  # s without input while moving -> fault
    inertia_tau: float = 0.4      # s

    @staticmethod
    def from_dict(d: dict) -> "TeleopConfig":
        return TeleopConfig(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class TeleopState:
    """Controller-side state; positions live in the simulator, not here."""

    n_joints: int
    mode: ControlMode = ControlMode.JOINT
    selected_joint: int = 0
    joint_speed_scale: float = 0.5
    cart_speed_scale: float = 0.5
    inertia_enabled: bool = False
    inertia_tau: float = 0.4
    fault: Optional[FaultKind] = None
    commanded_vel: tuple = ()
    gripper_cmd: float = 0.0
    axes: dict = field(default_factory=dict)  # action -> value in [-1, 1]
    pending_preset: Optional[str] = None
    last_event_t: float = 0.0

    def __post_init__(self):
        if not self.commanded_vel:
            object.__setattr__(self, "commanded_vel", (0.0,) * self.n_joints)
        if not (0 <= self.selected_joint < self.n_joints):
            raise ValueError("selected_joint out of range")

    def axis(self, action: str) -> float:
        return self.axes.get(action, 0.0)


def initial_state(model: RobotModel, cfg: Optional[TeleopConfig] = None) -> TeleopState:
    cfg = cfg or TeleopConfig()
    return TeleopState(n_joints=model.n_joints, inertia_tau=cfg.inertia_tau)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def process_input(
    state: TeleopState,
    event: InputEvent,
    bindings: BindingMap,
    cfg: Optional[TeleopConfig] = None,
) -> TeleopState:
    """Pure transition for one input event. Unknown bindings leave the state
    untouched (logged); mode toggles preserve everything but the mode."""
    cfg = cfg or TeleopConfig()
    action = bindings.action_for(event.id)
    if action is None:
        log.debug("ignoring unbound input id %r", event.id)
        return state

    state = replace(state, last_event_t=event.t)

    if event.kind is EventKind.AXIS:
        if action not in AXIS_ACTIONS:
            log.debug("axis event %r bound to non-axis action %r; ignored", event.id, action)
            return state
        value = min(1.0, max(-1.0, event.value))
        axes = dict(state.axes)
        axes[action] = value
        return replace(state, axes=axes)

    if event.kind is EventKind.RELEASE:
        return state

    # Button press.
    if action == "mode_toggle":
        new_mode = (
            ControlMode.CARTESIAN if state.mode is ControlMode.JOINT else ControlMode.JOINT
        )
        return replace(state, mode=new_mode)
    if action == "speed_up" or action == "speed_down":
        delta = cfg.speed_step if action == "speed_up" else -cfg.speed_step
        if state.mode is ControlMode.JOINT:
            return replace(state, joint_speed_scale=_clamp01(state.joint_speed_scale + delta))
        return replace(state, cart_speed_scale=_clamp01(state.cart_speed_scale + delta))
    if action == "joint_next":
        return replace(state, selected_joint=(state.selected_joint + 1) % state.n_joints)
    if action == "joint_prev":
        return replace(state, selected_joint=(state.selected_joint - 1) % state.n_joints)
    if action == "inertia_toggle":
        return replace(state, inertia_enabled=not state.inertia_enabled)
    if action == "fault_clear":
        return replace(state, fault=None)
    if action == "gripper_open":
        return replace(state, gripper_cmd=_clamp01(state.gripper_cmd + cfg.gripper_step))
    if action == "gripper_close":
        return replace(state, gripper_cmd=_clamp01(state.gripper_cmd - cfg.gripper_step))
    if action.startswith(PRESET_PREFIX):
        return replace(state, pending_preset=action[len(PRESET_PREFIX):])
    log.debug("button event %r bound to non-button action %r; ignored", event.id, action)
    return state


def resolve_velocity(
    state: TeleopState,
    model: RobotModel,
    q: Seq[float],
    cfg: Optional[TeleopConfig] = None,
) -> tuple[np.ndarray, TeleopState]:
    """Joint-velocity target for the current stick state.

    Joint mode drives only the selected joint. Cartesian mode maps the stick
    twist through the Jacobian pseudo-inverse (damping engages only inside
    the singular region, where motion is zeroed and a NearSingularity fault
    latches). While any fault is latched the command is zero.
    """
    cfg = cfg or TeleopConfig()
    zeros = np.zeros(model.n_joints)
    if state.fault is not None:
        return zeros, state

    vel_limits = model.vel_limits
    if state.mode is ControlMode.JOINT:
        v = zeros.copy()
        stick = state.axis("joint_drive")
        j = state.selected_joint
        v[j] = stick * state.joint_speed_scale * vel_limits[j]
        return v, state

    twist = np.array(
        [
            state.axis("cart_x") * cfg.cart_lin_speed,
            state.axis("cart_y") * cfg.cart_lin_speed,
            state.axis("cart_z") * cfg.cart_lin_speed,
            state.axis("cart_rx") * cfg.cart_ang_speed,
            state.axis("cart_ry") * cfg.cart_ang_speed,
            state.axis("cart_rz") * cfg.cart_ang_speed,
        ]
    ) * state.cart_speed_scale
    w = manipulability(model, q)
    if w < cfg.singularity_threshold:
        return zeros, replace(state, fault=FaultKind.NEAR_SINGULARITY)
    J = jacobian(model, q)
    v = damped_pinv(J, 0.0) @ twist
    return np.clip(v, -vel_limits, vel_limits), state


def apply_inertia(
    prev_vel: Seq[float],
    target_vel: Seq[float],
    dt: float,
    tau: float,
    enabled: bool,
) -> np.ndarray:
    """First-order velocity lag v' = v + (dt/tau)(target - v); bypass when off."""
    target = np.asarray(target_vel, dtype=float)
    if not enabled:
        return target.copy()
    if dt <= 0 or tau <= 0:
        raise ValueError("apply_inertia needs dt > 0 and tau > 0")
    alpha = min(1.0, dt / tau)
    prev = np.asarray(prev_vel, dtype=float)
    return prev + alpha * (target - prev)


@dataclass(frozen=True)
class MotionRequest:
    """Point-to-point move emitted by preset recall, executed under PD with a
    smooth minimum-jerk reference."""

    target: np.ndarray
    duration: float
    name: str


def goto_preset(model: RobotModel, name: str, current_q: Seq[float]) -> MotionRequest:
    """Build the move request for a named posture.

    Duration is the slowest joint's travel time at half its velocity limit,
    floored at 1 s.
    """
    target = model.preset(name)
    current = np.asarray(current_q, dtype=float)
    travel = np.abs(target - current) / (0.5 * model.vel_limits)
    duration = max(1.0, float(np.max(travel)) if travel.size else 1.0)
    return MotionRequest(target=target, duration=duration, name=name)


# ---------------------------------------------------------------------------
# Recorded event streams (JSON)

EVENTS_FORMAT_VERSION = 1


def save_events(events: Seq[InputEvent], path: str | Path) -> None:
    data = {
        "version": EVENTS_FORMAT_VERSION,
        "events": [e.to_dict() for e in events],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_events(path: str | Path) -> list[InputEvent]:
    data = json.loads(Path(path).read_text())
    version = data.get("version")
    if version != EVENTS_FORMAT_VERSION:
        raise ValueError(
            f"unsupported events format version {version!r}; this build reads "
            f"version {EVENTS_FORMAT_VERSION}"
        )
    events = [InputEvent.from_dict(e) for e in data["events"]]
    if any(not math.isfinite(e.t) for e in events):
        raise ValueError("event timestamps must be finite")
    return events
