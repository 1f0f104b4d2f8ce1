"""Simulated execution: decoupled per-joint dynamics under PD tracking, with
sequence playback, teleop integration and trajectory recording.

The per-joint plant is inertia*qdd = tau - damping*qd integrated with
semi-implicit Euler at a fixed internal step (default 1 ms). Everything is
deterministic: fixed dt plus identical inputs give bit-identical logs.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence as Seq

import numpy as np

from .arm_model import RobotModel
from . import timeline as tl
from .teleop import (
    FaultKind,
    InputEvent,
    BindingMap,
    MotionRequest,
    TeleopConfig,
    TeleopState,
    apply_inertia,
    goto_preset,
    initial_state,
    process_input,
    resolve_velocity,
)
from .trajectory_log import TrajectoryLog

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
GRIPPER_RATE_LIMIT = 2.0  # fraction of range per second


class SimError(RuntimeError):
    """Playback requested in an incompatible state (busy, model mismatch)."""


class SimMode(enum.Enum):
    IDLE = "idle"
    TELEOP = "teleop"
    PLAYING = "playing"


@dataclass(frozen=True)
class ControllerGains:
    kp: np.ndarray
    kd: np.ndarray
    torque_limit: np.ndarray

    def __post_init__(self):
        for name in ("kp", "kd", "torque_limit"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.kp <= 0) or np.any(self.torque_limit <= 0) or np.any(self.kd < 0):
            raise ValueError("need kp > 0, kd >= 0, torque_limit > 0")

    @staticmethod
    def default_for(model: RobotModel) -> "ControllerGains":
        # Critically damped at wn = 10 rad/s for each decoupled joint.
        inertia = model.inertias
        return ControllerGains(
            kp=100.0 * inertia, kd=20.0 * inertia, torque_limit=200.0 * inertia
        )

    @staticmethod
    def from_dict(d: dict, model: RobotModel) -> "ControllerGains":
        n = model.n_joints

        def expand(v):
            arr = np.asarray(v, dtype=float)
            return np.full(n, float(arr)) if arr.ndim == 0 else arr

        base = ControllerGains.default_for(model)
        return ControllerGains(
            kp=expand(d.get("kp", base.kp)),
            kd=expand(d.get("kd", base.kd)),
            torque_limit=expand(d.get("torque_limit", base.torque_limit)),
        )

    def to_dict(self) -> dict:
        return {
            "kp": self.kp.tolist(),
            "kd": self.kd.tolist(),
            "torque_limit": self.torque_limit.tolist(),
        }


@dataclass(frozen=True)
class SimState:
    t: float
    q: np.ndarray
    qd: np.ndarray
    gripper: float
    q_ref: np.ndarray
    gripper_ref: float
    mode: SimMode = SimMode.IDLE

    @staticmethod
    def at_rest(model: RobotModel, q0: Optional[Seq[float]] = None) -> "SimState":
        if q0 is None:
            q0 = model.preset("home") if "home" in model.presets else np.zeros(model.n_joints)
        q0 = np.asarray(q0, dtype=float)
        return SimState(
            t=0.0,
            q=q0.copy(),
            qd=np.zeros(model.n_joints),
            gripper=0.0,
            q_ref=q0.copy(),
            gripper_ref=0.0,
        )


def step(
    state: SimState,
    model: RobotModel,
    gains: ControllerGains,
    q_ref: Seq[float],
    qd_ref: Seq[float],
    dt: float = DEFAULT_DT,
    gripper_ref: Optional[float] = None,
    gravity_torque: Optional[Seq[float]] = None,
) -> SimState:
    """One semi-implicit Euler step of the PD-tracked plant.

    Torque is clamped per joint, velocities saturate at the joint velocity
    limits, and positions clamp at the joint limits (zeroing the velocity at
    the stop). The gripper follows its reference under a rate limit.
    """
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt must be in (0, 0.01] s, got {dt}")
    q_ref = np.asarray(q_ref, dtype=float)
    qd_ref = np.asarray(qd_ref, dtype=float)
    tau = gains.kp * (q_ref - state.q) + gains.kd * (qd_ref - state.qd)
    tau = np.clip(tau, -gains.torque_limit, gains.torque_limit)
    if gravity_torque is not None:
        tau = tau + np.asarray(gravity_torque, dtype=float)
    qdd = (tau - model.dampings * state.qd) / model.inertias
    qd = np.clip(state.qd + qdd * dt, -model.vel_limits, model.vel_limits)
    q_free = state.q + qd * dt
    q = np.clip(q_free, model.limits_low, model.limits_high)
    qd = np.where(q == q_free, qd, 0.0)

    g_ref = state.gripper_ref if gripper_ref is None else float(gripper_ref)
    g_lo, g_hi = model.gripper_range
    g_step = np.clip(g_ref - state.gripper, -GRIPPER_RATE_LIMIT * dt, GRIPPER_RATE_LIMIT * dt)
    gripper = float(np.clip(state.gripper + g_step, g_lo, g_hi))

    return SimState(
        t=state.t + dt,
        q=q,
        qd=qd,
        gripper=gripper,
        q_ref=q_ref,
        gripper_ref=g_ref,
        mode=state.mode,
    )


def minimum_jerk_shape(s: float) -> tuple[float, float]:
    """Position and velocity shape of the smooth point-to-point profile on
    s in [0, 1] (velocity is d/ds)."""
    s = min(1.0, max(0.0, s))
    pos = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    vel = 30.0 * s * s * (1.0 - s) * (1.0 - s)
    return pos, vel


# Reference sampler: step index -> (q_ref, qd_ref, gripper_ref)
RefFn = Callable[[int], tuple[np.ndarray, np.ndarray, float]]


@dataclass
class Playback:
    """Step-by-step execution plan; shared by the CLI and the server so both
    produce identical logs for identical inputs."""

    name: str
    kind: str
    n_steps: int
    dt: float
    ref_fn: RefFn
    record_every: Optional[int]  # None -> no log
    record_rate: float
    return_mode: SimMode
    model_name: str
    model_def: Optional[dict] = None
    i: int = 0
    done: bool = False
    _rows: list = field(default_factory=list)

    @staticmethod
    def for_sequence(
        seq: tl.Sequence,
        model: RobotModel,
        record_rate: float = 100.0,
        dt: float = DEFAULT_DT,
    ) -> "Playback":
        tl.validate_sequence(seq, model)
        if seq.robot != model.name:
            raise SimError(
                f"sequence targets model {seq.robot!r} but the simulator runs "
                f"{model.name!r}"
            )
        record_every = _record_every(record_rate, dt)
        duration = seq.duration
        n_steps = max(0, int(math.ceil(duration / dt - 1e-9)))
        n = model.n_joints

        def ref_fn(i: int):
            t = i * dt
            q_ref, grip = tl.evaluate(seq, min(t, duration), n)
            t_hi = min(t + dt, duration)
            t_lo = max(t - dt, 0.0)
            span = t_hi - t_lo
            if span <= 0:
                qd_ref = np.zeros(n)
            else:
                q_hi, _ = tl.evaluate(seq, t_hi, n)
                q_lo, _ = tl.evaluate(seq, t_lo, n)
                qd_ref = (q_hi - q_lo) / span
            return q_ref, qd_ref, grip

        return Playback(
            name=seq.name,
            kind="sequence",
            n_steps=n_steps,
            dt=dt,
            ref_fn=ref_fn,
            record_every=record_every,
            record_rate=record_rate,
            return_mode=SimMode.IDLE,
            model_name=model.name,
            model_def=model.to_dict(),
        )

    @staticmethod
    def for_point_to_point(
        request: MotionRequest,
        start_q: np.ndarray,
        model: RobotModel,
        return_mode: SimMode,
        dt: float = DEFAULT_DT,
    ) -> "Playback":
        q0 = np.asarray(start_q, dtype=float).copy()
        target = request.target
        duration = request.duration
        n_steps = max(1, int(math.ceil(duration / dt - 1e-9)))

        def ref_fn(i: int):
            s = (i * dt) / duration
            pos, vel = minimum_jerk_shape(s)
            q_ref = q0 + (target - q0) * pos
            qd_ref = (target - q0) * vel / duration
            return q_ref, qd_ref, 0.0

        return Playback(
            name=f"preset:{request.name}",
            kind="preset",
            n_steps=n_steps,
            dt=dt,
            ref_fn=ref_fn,
            record_every=None,
            record_rate=0.0,
            return_mode=return_mode,
            model_name=model.name,
        )

    def advance(
        self,
        state: SimState,
        model: RobotModel,
        gains: ControllerGains,
        gravity_torque: Optional[Seq[float]] = None,
    ) -> SimState:
        if self.done:
            return state
        q_ref, qd_ref, grip_ref = self.ref_fn(self.i)
        if self.record_every is not None and self.i % self.record_every == 0:
            k = self.i // self.record_every
            self._rows.append(
                (k / self.record_rate, q_ref.copy(), state.q.copy(), state.qd.copy(), state.gripper)
            )
        if self.i >= self.n_steps:
            self.done = True
            return state
        state = step(state, model, gains, q_ref, qd_ref, self.dt, grip_ref, gravity_torque)
        self.i += 1
        return state

    def finalize_log(self) -> Optional[TrajectoryLog]:
        if self.record_every is None:
            return None
        rows = self._rows
        metadata = {
            "sequence": self.name,
            "model": self.model_name,
            "record_rate": self.record_rate,
            "dt": self.dt,
            "kind": "playback",
        }
        if self.model_def is not None:
            metadata["model_def"] = self.model_def
        return TrajectoryLog(
            rate=self.record_rate,
            t=np.array([r[0] for r in rows]),
            q_ref=np.array([r[1] for r in rows]),
            q_actual=np.array([r[2] for r in rows]),
            qd_actual=np.array([r[3] for r in rows]),
            gripper=np.array([r[4] for r in rows]),
            metadata=metadata,
        )


def _record_every(record_rate: float, dt: float) -> int:
    if record_rate <= 0:
        raise ValueError("record rate must be > 0")
    ratio = 1.0 / (record_rate * dt)
    every = int(round(ratio))
    if every < 1 or abs(ratio - every) > 1e-9:
        raise ValueError(
            f"record rate {record_rate} Hz must divide the internal step of {dt} s"
        )
    return every


def play_sequence(
    state: SimState,
    model: RobotModel,
    gains: ControllerGains,
    seq: tl.Sequence,
    record_rate: float = 100.0,
    dt: float = DEFAULT_DT,
) -> tuple[SimState, TrajectoryLog]:
    """Execute a sequence under PD tracking and return the complete log.

    The simulator must be idle; it is returned idle, holding the final pose.
    """
    if state.mode is not SimMode.IDLE:
        raise SimError(f"cannot play while mode is {state.mode.value}")
    playback = Playback.for_sequence(seq, model, record_rate, dt)
    while not playback.done:
        state = playback.advance(state, model, gains)
    log_ = playback.finalize_log()
    assert log_ is not None
    return replace(state, mode=SimMode.IDLE), log_


def run_teleop_tick(
    state: SimState,
    model: RobotModel,
    gains: ControllerGains,
    tele: TeleopState,
    dt: float = DEFAULT_DT,
    cfg: Optional[TeleopConfig] = None,
    gravity_torque: Optional[Seq[float]] = None,
) -> tuple[SimState, TeleopState]:
    """Advance one teleop control step.

    The smoothed commanded velocity integrates the tracking reference; hitting
    a joint limit latches a JointLimit fault, and a stale command stream with
    nonzero velocity latches CommandTimeout. Any latched fault zeroes motion
    until cleared.
    """
    cfg = cfg or TeleopConfig()
    if (
        tele.fault is None
        and max((abs(v) for v in tele.commanded_vel), default=0.0) > 1e-12
        and state.t - tele.last_event_t > cfg.command_timeout
    ):
        tele = replace(tele, fault=FaultKind.COMMAND_TIMEOUT)

    target, tele = resolve_velocity(tele, model, state.q, cfg)
    if tele.fault is not None:
        v = np.zeros(model.n_joints)
    else:
        v = apply_inertia(
            np.array(tele.commanded_vel), target, dt, tele.inertia_tau, tele.inertia_enabled
        )
    tele = replace(tele, commanded_vel=tuple(float(x) for x in v))

    ref_free = state.q_ref + v * dt
    ref = np.clip(ref_free, model.limits_low, model.limits_high)
    if tele.fault is None and np.any(ref != ref_free):
        tele = replace(tele, fault=FaultKind.JOINT_LIMIT)

    state = step(state, model, gains, ref, v, dt, gravity_torque=gravity_torque)
    return state, tele


class MotionRuntime:
    """Owns the authoritative simulation state and applies commands serially.

    Input events are stamped with the simulation time at which they are
    applied; replaying the recorded stream through a fresh runtime reproduces
    the trajectory bit for bit.
    """

    def __init__(
        self,
        model: RobotModel,
        gains: Optional[ControllerGains] = None,
        bindings: Optional[BindingMap] = None,
        teleop_cfg: Optional[TeleopConfig] = None,
        dt: float = DEFAULT_DT,
        record_rate: float = 100.0,
        gravity_torque: Optional[Seq[float]] = None,
    ):
        self.model = model
        self.gains = gains or ControllerGains.default_for(model)
        self.bindings = bindings or BindingMap({})
        self.teleop_cfg = teleop_cfg or TeleopConfig()
        self.dt = dt
        self.record_rate = record_rate
        self.gravity_torque = gravity_torque
        self.state = SimState.at_rest(model)
        self.teleop = initial_state(model, self.teleop_cfg)
        self.playback: Optional[Playback] = None
        self._mode_before_playback = SimMode.IDLE
        self.sequences: dict[str, tl.Sequence] = {}
        self.logs: dict[str, TrajectoryLog] = {}
        self._log_counter = 0
        self._current_log_id = ""
        self.session_events: list[InputEvent] = []

    # -- commands (applied between steps, in arrival order) -----------------

    def apply_event(self, event: InputEvent) -> InputEvent:
        """Apply one input event, stamped at the current simulation time."""
        stamped = replace(event, t=self.state.t)
        self.session_events.append(stamped)
        self.teleop = process_input(self.teleop, stamped, self.bindings, self.teleop_cfg)
        if self.teleop.pending_preset is not None:
            name = self.teleop.pending_preset
            self.teleop = replace(self.teleop, pending_preset=None)
            try:
                self.request_preset(name)
            except (KeyError, SimError) as exc:
                log.warning("preset %r not started: %s", name, exc)
        return stamped

    def clear_fault(self) -> None:
        self.teleop = replace(self.teleop, fault=None)

    def set_sim_mode(self, mode: SimMode) -> None:
        if mode is SimMode.PLAYING:
            raise SimError("playback starts via sequences or presets, not mode_set")
        if self.state.mode is SimMode.PLAYING:
            raise SimError("busy: playback in progress")
        if mode is SimMode.TELEOP:
            # Teleop regulates around the pose at entry.
            self.state = replace(self.state, mode=mode, q_ref=self.state.q.copy())
        else:
            self.state = replace(self.state, mode=mode)

    def request_preset(self, name: str) -> MotionRequest:
        """Recall a stored posture as a smooth point-to-point move. Allowed
        during teleop (it doubles as a fault-recovery routine) and clears any
        latched fault."""
        if self.state.mode is SimMode.PLAYING:
            raise SimError("busy: playback in progress")
        request = goto_preset(self.model, name, self.state.q)
        self._mode_before_playback = self.state.mode
        self.playback = Playback.for_point_to_point(
            request, self.state.q, self.model, self._mode_before_playback, self.dt
        )
        self.teleop = replace(self.teleop, fault=None, commanded_vel=(0.0,) * self.model.n_joints)
        self.state = replace(self.state, mode=SimMode.PLAYING)
        return request

    def upload_sequence(self, seq: tl.Sequence) -> None:
        tl.validate_sequence(seq, self.model)
        if seq.robot != self.model.name:
            raise SimError(
                f"sequence targets model {seq.robot!r}, simulator runs {self.model.name!r}"
            )
        self.sequences[seq.name] = seq

    def start_sequence(self, name: str, record_rate: Optional[float] = None) -> str:
        if self.state.mode is SimMode.PLAYING:
            raise SimError("busy: playback in progress")
        if self.state.mode is not SimMode.IDLE:
            raise SimError(f"sequence playback requires idle mode, not {self.state.mode.value}")
        if name not in self.sequences:
            raise KeyError(f"no uploaded sequence named {name!r}")
        rate = record_rate if record_rate is not None else self.record_rate
        self._mode_before_playback = SimMode.IDLE
        self.playback = Playback.for_sequence(self.sequences[name], self.model, rate, self.dt)
        self._log_counter += 1
        self._current_log_id = f"{name}#{self._log_counter}"
        self.state = replace(self.state, mode=SimMode.PLAYING)
        return self._current_log_id

    def stop_playback(self) -> None:
        if self.playback is None:
            return
        self.playback = None
        self.state = replace(
            self.state, mode=self._mode_before_playback, q_ref=self.state.q.copy()
        )

    # -- stepping ------------------------------------------------------------

    def step_once(self) -> Optional[dict]:
        """Advance one internal step; returns a notification for finished
        playback, else None."""
        if self.state.mode is SimMode.PLAYING and self.playback is not None:
            self.state = self.playback.advance(
                self.state, self.model, self.gains, self.gravity_torque
            )
            if self.playback.done:
                done = self.playback
                self.playback = None
                self.state = replace(self.state, mode=done.return_mode)
                log_ = done.finalize_log()
                if log_ is None:
                    return {"event": "preset_done", "name": done.name}
                log_id = self._current_log_id
                self.logs[log_id] = log_
                return {"event": "play_done", "name": done.name, "log_id": log_id}
            return None
        if self.state.mode is SimMode.TELEOP:
            self.state, self.teleop = run_teleop_tick(
                self.state,
                self.model,
                self.gains,
                self.teleop,
                self.dt,
                self.teleop_cfg,
                self.gravity_torque,
            )
            return None
        # Idle: hold the reference pose.
        self.state = step(
            self.state,
            self.model,
            self.gains,
            self.state.q_ref,
            np.zeros(self.model.n_joints),
            self.dt,
            gravity_torque=self.gravity_torque,
        )
        return None

    def run_steps(self, n: int) -> list[dict]:
        notes = []
        for _ in range(n):
            note = self.step_once()
            if note is not None:
                notes.append(note)
        return notes

    @property
    def playing(self) -> bool:
        return self.state.mode is SimMode.PLAYING


def replay_events(
    model: RobotModel,
    events: Seq[InputEvent],
    bindings: BindingMap,
    gains: Optional[ControllerGains] = None,
    teleop_cfg: Optional[TeleopConfig] = None,
    record_rate: float = 100.0,
    dt: float = DEFAULT_DT,
    tail: float = 1.0,
) -> TrajectoryLog:
    """Deterministically re-simulate a recorded teleop session.

    Events apply at the first step whose simulation time reaches their stamp;
    recording runs for `tail` seconds past the last event.
    """
    runtime = MotionRuntime(
        model, gains=gains, bindings=bindings, teleop_cfg=teleop_cfg, dt=dt
    )
    runtime.set_sim_mode(SimMode.TELEOP)
    pending = sorted(events, key=lambda e: e.t)
    end_t = (pending[-1].t if pending else 0.0) + tail
    record_every = _record_every(record_rate, dt)

    rows = []
    i = 0
    k = 0
    while True:
        while pending and pending[0].t <= runtime.state.t:
            ev = pending.pop(0)
            runtime.teleop = process_input(runtime.teleop, ev, bindings, runtime.teleop_cfg)
            if runtime.teleop.pending_preset is not None:
                name = runtime.teleop.pending_preset
                runtime.teleop = replace(runtime.teleop, pending_preset=None)
                try:
                    runtime.request_preset(name)
                except (KeyError, SimError):
                    pass
        if i % record_every == 0:
            rows.append(
                (
                    k / record_rate,
                    runtime.state.q_ref.copy(),
                    runtime.state.q.copy(),
                    runtime.state.qd.copy(),
                    runtime.state.gripper,
                )
            )
            k += 1
        if runtime.state.t >= end_t:
            break
        runtime.step_once()
        i += 1

    return TrajectoryLog(
        rate=record_rate,
        t=np.array([r[0] for r in rows]),
        q_ref=np.array([r[1] for r in rows]),
        q_actual=np.array([r[2] for r in rows]),
        qd_actual=np.array([r[3] for r in rows]),
        gripper=np.array([r[4] for r in rows]),
        metadata={
            "model": model.name,
            "model_def": model.to_dict(),
            "kind": "replay",
            "record_rate": record_rate,
            "dt": dt,
        },
    )
