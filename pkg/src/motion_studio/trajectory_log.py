"""Time-stamped record of an executed (or sampled) motion.

File format: CSV with header ``t,q0..qN-1,ref0..refN-1,qd0..qdN-1,grip`` in
radians/seconds, plus a JSON metadata sidecar next to it (``<stem>.meta.json``).
Floats are written with shortest round-trip precision so a parse-back is
bit-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class LogFormatError(ValueError):
    """Raised for malformed log files or inconsistent log columns."""


@dataclass(frozen=True)
class TrajectoryLog:
    rate: float
    t: np.ndarray          # (n,)
    q_ref: np.ndarray      # (n, N)
    q_actual: np.ndarray   # (n, N)
    qd_actual: np.ndarray  # (n, N)
    gripper: np.ndarray    # (n,)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "q_ref", "q_actual", "qd_actual", "gripper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.t)
        if self.q_ref.shape != self.q_actual.shape or self.q_ref.shape != self.qd_actual.shape:
            raise LogFormatError("q_ref/q_actual/qd_actual shapes differ")
        if self.q_ref.ndim != 2 or self.q_ref.shape[0] != n or self.gripper.shape != (n,):
            raise LogFormatError("log columns have inconsistent lengths")
        if self.rate <= 0:
            raise LogFormatError(f"rate must be > 0, got {self.rate}")
        if n >= 2:
            gaps = np.diff(self.t)
            if not np.allclose(gaps, 1.0 / self.rate, atol=1e-9, rtol=0):
                raise LogFormatError("timestamps are not uniform at the declared rate")

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def n_joints(self) -> int:
        return self.q_ref.shape[1]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.n_samples else 0.0

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "t": self.t.tolist(),
            "q_ref": self.q_ref.tolist(),
            "q_actual": self.q_actual.tolist(),
            "qd_actual": self.qd_actual.tolist(),
            "gripper": self.gripper.tolist(),
            "metadata": self.metadata,
        }

    @staticmethod
    def from_dict(data: dict) -> "TrajectoryLog":
        return TrajectoryLog(
            rate=float(data["rate"]),
            t=np.array(data["t"], float),
            q_ref=np.array(data["q_ref"], float).reshape(len(data["t"]), -1),
            q_actual=np.array(data["q_actual"], float).reshape(len(data["t"]), -1),
            qd_actual=np.array(data["qd_actual"], float).reshape(len(data["t"]), -1),
            gripper=np.array(data["gripper"], float),
            metadata=dict(data.get("metadata", {})),
        )

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        n_joints = self.n_joints
        header = (
            ["t"]
            + [f"q{i}" for i in range(n_joints)]
            + [f"ref{i}" for i in range(n_joints)]
            + [f"qd{i}" for i in range(n_joints)]
            + ["grip"]
        )
        lines = [",".join(header)]
        for i in range(self.n_samples):
            row = (
                [self.t[i]]
                + list(self.q_actual[i])
                + list(self.q_ref[i])
                + list(self.qd_actual[i])
                + [self.gripper[i]]
            )
            lines.append(",".join(repr(float(x)) for x in row))
        path.write_text("\n".join(lines) + "\n")
        sidecar = {"rate": self.rate, "metadata": self.metadata}
        _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @staticmethod
    def from_csv(path: str | Path) -> "TrajectoryLog":
        path = Path(path)
        lines = path.read_text().strip().splitlines()
        if not lines:
            raise LogFormatError(f"{path}: empty log file")
        header = lines[0].split(",")
        if header[0] != "t" or header[-1] != "grip" or (len(header) - 2) % 3 != 0:
            raise LogFormatError(f"{path}: unexpected CSV header {lines[0]!r}")
        n_joints = (len(header) - 2) // 3
        data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
        if data.size == 0:
            raise LogFormatError(f"{path}: log has no rows")
        if data.shape[1] != len(header):
            raise LogFormatError(f"{path}: row width does not match header")
        rate = None
        metadata: dict = {}
        sidecar = _sidecar_path(path)
        if sidecar.exists():
            side = json.loads(sidecar.read_text())
            rate = side.get("rate")
            metadata = side.get("metadata", {})
        if rate is None:
            if len(data) < 2:
                raise LogFormatError(f"{path}: cannot infer rate from a single row")
            rate = 1.0 / float(data[1, 0] - data[0, 0])
        return TrajectoryLog(
            rate=float(rate),
            t=data[:, 0],
            q_actual=data[:, 1 : 1 + n_joints],
            q_ref=data[:, 1 + n_joints : 1 + 2 * n_joints],
            qd_actual=data[:, 1 + 2 * n_joints : 1 + 3 * n_joints],
            gripper=data[:, -1],
            metadata=metadata,
        )


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".meta.json")
