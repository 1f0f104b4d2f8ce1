"""Keyframe timeline engine: per-joint animation curves with step, linear and
x-monotone cubic Bezier segments, plus the editing operations used by the
studio workflow (insert/delete, segment duplication, time scaling).

Sequences are immutable values; every edit returns a new Sequence. The JSON
interchange format is versioned (currently 1) and documented in the README.
"""
from __future__ import annotations

import bisect
import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .arm_model import RobotModel

GRIPPER = "gripper"
Target = Union[int, str]

SEQUENCE_FORMAT_VERSION = 1

# The curve parameter is solved by bisection run to float exhaustion, which
# is well inside the 1e-9 s contract on the time bracket.
_BEZIER_MAX_ITERS = 120


class TimelineError(ValueError):
    """Invalid timeline content or edit (limits, overlaps, bad schema)."""


class Interp(enum.Enum):
    STEP = "step"
    LINEAR = "linear"
    BEZIER = "bezier"


@dataclass(frozen=True)
class Keyframe:
    """Control point of a channel curve.

    Handles are (dt, dvalue) offsets along the curve direction: the out-handle
    is added to the key, the in-handle is subtracted. A missing handle
    defaults to one third of the segment span with zero value offset (an
    ease shape that is flat at the key).
    """

    t: float
    value: float
    interp: Interp = Interp.LINEAR
    handle_in: Optional[tuple[float, float]] = None
    handle_out: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.t < 0 or not math.isfinite(self.t):
            raise TimelineError(f"keyframe time must be finite and >= 0, got {self.t}")
        if not math.isfinite(self.value):
            raise TimelineError("keyframe value must be finite")
        for name, h in (("handle_in", self.handle_in), ("handle_out", self.handle_out)):
            if h is not None and (h[0] < 0 or not all(math.isfinite(x) for x in h)):
                raise TimelineError(f"{name} must have finite components and dt >= 0")


@dataclass(frozen=True)
class Channel:
    """Time-sorted keyframes driving one joint index or the gripper."""

    target: Target
    keys: tuple[Keyframe, ...]

    def __post_init__(self):
        if isinstance(self.target, str) and self.target != GRIPPER:
            raise TimelineError(f"channel target must be a joint index or {GRIPPER!r}")
        if isinstance(self.target, int) and self.target < 0:
            raise TimelineError("joint channel target must be >= 0")
        times = [k.t for k in self.keys]
        if any(t1 - t0 <= 0 for t0, t1 in zip(times, times[1:])):
            raise TimelineError(
                f"channel {self.target!r}: keyframe times must be strictly increasing"
            )
        # Bezier handles may not reach past their neighbouring keys; this is
        # what keeps the x-cubic single-valued.
        for left, right in zip(self.keys, self.keys[1:]):
            span = right.t - left.t
            if left.interp is Interp.BEZIER:
                out_dt = left.handle_out[0] if left.handle_out else span / 3.0
                in_dt = right.handle_in[0] if right.handle_in else span / 3.0
                if out_dt > span or in_dt > span:
                    raise TimelineError(
                        f"channel {self.target!r}: handle at t={left.t} or t={right.t} "
                        f"crosses the neighbouring keyframe"
                    )

    @property
    def times(self) -> list[float]:
        return [k.t for k in self.keys]


@dataclass(frozen=True)
class Sequence:
    """Named collection of channels; duration is the latest keyframe time."""

    name: str
    robot: str
    channels: tuple[Channel, ...] = ()

    def __post_init__(self):
        targets = [c.target for c in self.channels]
        if len(set(targets)) != len(targets):
            raise TimelineError("at most one channel per target")

    @property
    def duration(self) -> float:
        return max((c.keys[-1].t for c in self.channels if c.keys), default=0.0)

    def channel(self, target: Target) -> Optional[Channel]:
        for c in self.channels:
            if c.target == target:
                return c
        return None

    def joint_targets(self) -> list[int]:
        return sorted(c.target for c in self.channels if isinstance(c.target, int))


def _bezier_points(left: Keyframe, right: Keyframe):
    span = right.t - left.t
    out_h = left.handle_out if left.handle_out is not None else (span / 3.0, 0.0)
    in_h = right.handle_in if right.handle_in is not None else (span / 3.0, 0.0)
    x = (left.t, left.t + out_h[0], right.t - in_h[0], right.t)
    y = (left.value, left.value + out_h[1], right.value - in_h[1], right.value)
    return x, y


def _cubic(p0, p1, p2, p3, u):
    w = 1.0 - u
    return w * w * w * p0 + 3.0 * w * w * u * p1 + 3.0 * w * u * u * p2 + u * u * u * p3


def _bezier_value(left: Keyframe, right: Keyframe, t: float) -> float:
    x, y = _bezier_points(left, right)
    lo, hi = 0.0, 1.0
    for _ in range(_BEZIER_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _cubic(*x, mid) < t:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    return _cubic(*y, u)


def channel_value(channel: Channel, t: float) -> float:
    """Curve value at time t; holds first/last values outside the key range."""
    keys = channel.keys
    if not keys:
        return 0.0
    times = channel.times
    if t <= times[0]:
        return keys[0].value
    if t >= times[-1]:
        return keys[-1].value
    i = bisect.bisect_right(times, t)
    left, right = keys[i - 1], keys[i]
    if t == left.t:
        return left.value
    if left.interp is Interp.STEP:
        return left.value
    if left.interp is Interp.LINEAR:
        frac = (t - left.t) / (right.t - left.t)
        return left.value + frac * (right.value - left.value)
    return _bezier_value(left, right, t)


def evaluate(seq: Sequence, t: float, n_joints: Optional[int] = None) -> tuple[np.ndarray, float]:
    """Joint vector and gripper value at time t.

    Joints without a channel hold 0. n_joints defaults to one past the
    highest joint index used by the sequence.
    """
    if t < 0:
        raise TimelineError(f"evaluation time must be >= 0, got {t}")
    joints = seq.joint_targets()
    if n_joints is None:
        n_joints = (joints[-1] + 1) if joints else 0
    q = np.zeros(n_joints)
    gripper = 0.0
    for c in seq.channels:
        if c.target == GRIPPER:
            gripper = channel_value(c, t)
        else:
            if c.target >= n_joints:
                raise TimelineError(
                    f"channel targets joint {c.target} but only {n_joints} joints exist"
                )
            q[c.target] = channel_value(c, t)
    return q, gripper


def _target_limits(target: Target, model: RobotModel) -> tuple[float, float]:
    if target == GRIPPER:
        return model.gripper_range
    if target >= model.n_joints:
        raise TimelineError(
            f"channel targets joint {target} but model {model.name!r} has "
            f"{model.n_joints} joints"
        )
    return model.joints[target].limits


def validate_sequence(seq: Sequence, model: RobotModel) -> None:
    """Check every channel/key against the model; error messages carry the
    channel index and key index of the offending entry."""
    for ci, c in enumerate(seq.channels):
        lo, hi = _target_limits(c.target, model)
        for ki, k in enumerate(c.keys):
            if not (lo <= k.value <= hi):
                raise TimelineError(
                    f"channels[{ci}] (target {c.target!r}) keys[{ki}]: value "
                    f"{k.value} outside limits [{lo}, {hi}]"
                )


def _with_channel(seq: Sequence, channel: Channel) -> Sequence:
    # Replace in place to keep channel order (and serialized bytes) stable.
    if seq.channel(channel.target) is None:
        new = seq.channels + (channel,)
    else:
        new = tuple(channel if c.target == channel.target else c for c in seq.channels)
    if not channel.keys:
        new = tuple(c for c in new if c.target != channel.target)
    return replace(seq, channels=new)


def insert_keyframe(
    seq: Sequence, target: Target, key: Keyframe, model: Optional[RobotModel] = None
) -> Sequence:
    """Insert a key; a key at the same time is replaced. With a model given,
    out-of-limit values are rejected."""
    if model is not None:
        lo, hi = _target_limits(target, model)
        if not (lo <= key.value <= hi):
            raise TimelineError(
                f"value {key.value} outside limits [{lo}, {hi}] for target {target!r}"
            )
    channel = seq.channel(target) or Channel(target, ())
    keys = [k for k in channel.keys if k.t != key.t]
    keys.append(key)
    keys.sort(key=lambda k: k.t)
    return _with_channel(seq, Channel(target, tuple(keys)))


def delete_keyframe(seq: Sequence, target: Target, t: float) -> Sequence:
    channel = seq.channel(target)
    if channel is None or all(k.t != t for k in channel.keys):
        raise TimelineError(f"no keyframe at t={t} on channel {target!r}")
    keys = tuple(k for k in channel.keys if k.t != t)
    return _with_channel(seq, Channel(target, keys))


def duplicate_segment(seq: Sequence, t0: float, t1: float, paste_at: float) -> Sequence:
    """Copy all keys with t in [t0, t1] to [paste_at, paste_at + (t1 - t0)].

    Handles are preserved. Channels receiving pasted keys must have no
    existing keys inside the paste window.
    """
    if not (0 <= t0 < t1):
        raise TimelineError(f"need 0 <= t0 < t1, got [{t0}, {t1}]")
    if paste_at < 0:
        raise TimelineError("paste_at must be >= 0")
    shift = paste_at - t0
    window = (paste_at, paste_at + (t1 - t0))
    out = seq
    for c in seq.channels:
        copied = [k for k in c.keys if t0 <= k.t <= t1]
        if not copied:
            continue
        clash = [k.t for k in c.keys if window[0] <= k.t <= window[1]]
        if clash:
            raise TimelineError(
                f"paste window [{window[0]}, {window[1]}] overlaps existing keys "
                f"at {clash} on channel {c.target!r}"
            )
        new_keys = list(c.keys) + [replace(k, t=k.t + shift) for k in copied]
        new_keys.sort(key=lambda k: k.t)
        out = _with_channel(out, Channel(c.target, tuple(new_keys)))
    return out


def _scale_handle(h: Optional[tuple[float, float]], factor: float):
    return None if h is None else (h[0] * factor, h[1])


def time_scale(seq: Sequence, t0: float, t1: float, factor: float) -> Sequence:
    """Remap key times in [t0, t1] by t -> t0 + factor*(t - t0); keys after t1
    shift by (factor - 1)*(t1 - t0); Bezier handle time components scale."""
    if factor <= 0:
        raise TimelineError(f"scale factor must be > 0, got {factor}")
    if not (0 <= t0 < t1):
        raise TimelineError(f"need 0 <= t0 < t1, got [{t0}, {t1}]")
    shift = (factor - 1.0) * (t1 - t0)
    out_channels = []
    for c in seq.channels:
        new_keys = []
        for k in c.keys:
            if t0 <= k.t <= t1:
                new_keys.append(
                    replace(
                        k,
                        t=t0 + factor * (k.t - t0),
                        handle_in=_scale_handle(k.handle_in, factor),
                        handle_out=_scale_handle(k.handle_out, factor),
                    )
                )
            elif k.t > t1:
                new_keys.append(replace(k, t=k.t + shift))
            else:
                new_keys.append(k)
        out_channels.append(Channel(c.target, tuple(new_keys)))
    return replace(seq, channels=tuple(out_channels))


def sample(seq: Sequence, rate: float = 100.0, n_joints: Optional[int] = None):
    """Uniform reference-only sampling of the sequence over [0, duration].

    Returns a TrajectoryLog whose actual columns mirror the reference and
    whose velocities come from central differences.
    """
    from .trajectory_log import TrajectoryLog

    if rate <= 0:
        raise TimelineError(f"sample rate must be > 0, got {rate}")
    duration = seq.duration
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate
    joints = seq.joint_targets()
    if n_joints is None:
        n_joints = (joints[-1] + 1) if joints else 0
    q = np.zeros((n, n_joints))
    grip = np.zeros(n)
    for i, ti in enumerate(t):
        q[i], grip[i] = evaluate(seq, float(ti), n_joints)
    qd = np.gradient(q, 1.0 / rate, axis=0) if n >= 2 else np.zeros_like(q)
    return TrajectoryLog(
        rate=rate,
        t=t,
        q_ref=q,
        q_actual=q.copy(),
        qd_actual=qd,
        gripper=grip,
        metadata={"sequence": seq.name, "model": seq.robot, "kind": "reference"},
    )


# ---------------------------------------------------------------------------
# JSON interchange

def sequence_to_dict(seq: Sequence) -> dict:
    channels = []
    for c in seq.channels:
        keys = []
        for k in c.keys:
            entry = {"t": k.t, "v": k.value, "interp": k.interp.value}
            if k.handle_in is not None:
                entry["h_in"] = list(k.handle_in)
            if k.handle_out is not None:
                entry["h_out"] = list(k.handle_out)
            keys.append(entry)
        channels.append({"target": c.target, "keys": keys})
    return {
        "version": SEQUENCE_FORMAT_VERSION,
        "name": seq.name,
        "robot": seq.robot,
        "channels": channels,
    }


def sequence_from_dict(data: dict) -> Sequence:
    version = data.get("version")
    if version != SEQUENCE_FORMAT_VERSION:
        raise TimelineError(
            f"unsupported sequence format version {version!r}; this build reads "
            f"version {SEQUENCE_FORMAT_VERSION}"
        )
    channels = []
    for ci, c in enumerate(data.get("channels", [])):
        try:
            target = c["target"]
            keys = tuple(
                Keyframe(
                    t=float(k["t"]),
                    value=float(k["v"]),
                    interp=Interp(k.get("interp", "linear")),
                    handle_in=tuple(k["h_in"]) if k.get("h_in") else None,
                    handle_out=tuple(k["h_out"]) if k.get("h_out") else None,
                )
                for k in c["keys"]
            )
            channels.append(Channel(target, keys))
        except (KeyError, ValueError, TypeError) as exc:
            raise TimelineError(f"channels[{ci}]: {exc}") from exc
    return Sequence(name=str(data["name"]), robot=str(data["robot"]), channels=tuple(channels))


def _canonical_number(x) -> str:
    if isinstance(x, float) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x) if isinstance(x, float) else str(x)


def _canonical_json(value) -> str:
    if isinstance(value, dict):
        items = ",".join(
            f"{json.dumps(k)}:{_canonical_json(v)}" for k, v in sorted(value.items())
        )
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical_json(v) for v in value) + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, float)):
        return _canonical_number(value)
    return json.dumps(value)


def sequence_to_canonical_json(seq: Sequence) -> str:
    """Canonical byte-stable export: sorted keys, compact separators, shortest
    round-trip numbers with integer-valued floats written without '.0' (the
    same rendering ECMAScript produces)."""
    return _canonical_json(sequence_to_dict(seq))


def load_sequence(path: str | Path) -> Sequence:
    return sequence_from_dict(json.loads(Path(path).read_text()))


def save_sequence(seq: Sequence, path: str | Path) -> None:
    Path(path).write_text(sequence_to_canonical_json(seq) + "\n")
