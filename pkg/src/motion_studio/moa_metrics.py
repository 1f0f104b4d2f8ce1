"""Quantitative movement-quality metrics over executed trajectories, plus a
rule-based classifier onto the four effort tonalities (spatial, temporal,
weight, flow) used by the Movement Observation-Analysis vocabulary.

Every formula and threshold is an explicit, versioned choice held in
MetricConfig: the tonalities themselves are qualitative, and these
operationalizations have not been validated against trained observers.
Defaults were tuned to separate the synthetic archetypes in
:mod:`motion_studio.archetypes`.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import butter, filtfilt

from .arm_model import RobotModel, forward_kinematics
from .trajectory_log import TrajectoryLog

_TINY_PATH = 1e-6  # m; below this the path is treated as stationary


class AnalysisError(ValueError):
    """Log unusable for analysis (too short or zero duration)."""


class SpatialTonality(enum.Enum):
    UNIDIRECTIONAL = "unidirectional"
    MULTIDIRECTIONAL = "multidirectional"
    NEUTRAL = "neutral"


class TemporalTonality(enum.Enum):
    ACCELERATED = "accelerated"
    DECELERATED = "decelerated"
    NEUTRAL = "neutral"


class WeightTonality(enum.Enum):
    LIGHT = "light"
    STRONG = "strong"
    HEAVY = "heavy"


class FlowTonality(enum.Enum):
    CONTROLLED = "controlled"
    UNHINDERED = "unhindered"


_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class MetricConfig:
    """All knobs of the metric pipeline and classifier, JSON-serializable so
    analyses are reproducible."""

    version: int = 1
    filter_hz: Optional[float] = 10.0   # zero-phase low-pass before derivatives
    speed_ref: float = 1.0              # m/s mapping peak speed to weight_index 1
    up_axis: str = "z"                  # gravity-aligned axis of the base frame
    directness_unidirectional: float = 0.8
    directness_multidirectional: float = 0.5
    skew_accelerated: float = 0.2
    skew_decelerated: float = -0.2
    weight_strong: float = 0.6
    drop_heavy: float = 0.5
    flow_unhindered_ldj: float = -8.0

    def __post_init__(self):
        if self.up_axis not in _AXIS_INDEX:
            raise ValueError(f"up_axis must be one of {sorted(_AXIS_INDEX)}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "filter_hz": self.filter_hz,
            "speed_ref": self.speed_ref,
            "up_axis": self.up_axis,
            "directness_unidirectional": self.directness_unidirectional,
            "directness_multidirectional": self.directness_multidirectional,
            "skew_accelerated": self.skew_accelerated,
            "skew_decelerated": self.skew_decelerated,
            "weight_strong": self.weight_strong,
            "drop_heavy": self.drop_heavy,
            "flow_unhindered_ldj": self.flow_unhindered_ldj,
        }

    @staticmethod
    def from_dict(d: dict) -> "MetricConfig":
        known = {f for f in MetricConfig.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown metric config fields: {sorted(unknown)}")
        version = d.get("version", 1)
        if version != 1:
            raise ValueError(
                f"unsupported metric config version {version!r}; this build reads version 1"
            )
        return MetricConfig(**d)

    @staticmethod
    def load(path: str | Path) -> "MetricConfig":
        return MetricConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EffortProfile:
    directness: float          # [0, 1] chord length over path length
    temporal_skew: float       # [-1, 1] speed trend; positive = speeding up
    weight_index: float        # [0, 1] peak speed over speed_ref
    smoothness_ldj: float      # log dimensionless jerk; higher = smoother
    vertical_drop_ratio: float # [-1, 1] net descent over path length

    def to_dict(self) -> dict:
        return {
            "directness": self.directness,
            "temporal_skew": self.temporal_skew,
            "weight_index": self.weight_index,
            "smoothness_ldj": self.smoothness_ldj,
            "vertical_drop_ratio": self.vertical_drop_ratio,
        }


@dataclass(frozen=True)
class TonalityClassification:
    spatial: SpatialTonality
    temporal: TemporalTonality
    weight: WeightTonality
    flow: FlowTonality
    thresholds_used: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spatial": self.spatial.value,
            "temporal": self.temporal.value,
            "weight": self.weight.value,
            "flow": self.flow.value,
            "thresholds_used": self.thresholds_used,
        }

    def labels(self) -> dict:
        return {
            "spatial": self.spatial.value,
            "temporal": self.temporal.value,
            "weight": self.weight.value,
            "flow": self.flow.value,
        }


def _lowpass(x: np.ndarray, dt: float, cutoff_hz: float) -> np.ndarray:
    nyquist = 0.5 / dt
    wn = cutoff_hz / nyquist
    if wn >= 1.0:
        return x
    b, a = butter(2, wn)
    # Symmetrized zero-phase pass: filtfilt's edge treatment is not exactly
    # reversal-symmetric on its own, and the reversal properties of the
    # metrics are contractual.
    fwd = filtfilt(b, a, x, axis=0)
    bwd = filtfilt(b, a, x[::-1], axis=0)[::-1]
    return 0.5 * (fwd + bwd)


def _jerk_squared_integral(x: np.ndarray, dt: float) -> float:
    # Third differences live on a staggered grid (one estimate per interior
    # gap); extend the end estimates to the boundaries so the peak jerk that
    # smooth point-to-point profiles put there is not truncated away.
    j = np.diff(x, n=3, axis=0) / dt**3
    if len(j) == 0:
        return 0.0
    tj = 1.5 * dt + np.arange(len(j)) * dt
    j = np.vstack([j[0], j, j[-1]])
    tj = np.concatenate([[0.0], tj, [(len(x) - 1) * dt]])
    return float(np.trapezoid(np.sum(j * j, axis=1), tj))


def profile_from_path(
    t: np.ndarray, positions: np.ndarray, cfg: Optional[MetricConfig] = None
) -> EffortProfile:
    """Effort profile of a uniformly sampled end-effector path (n x 3, m)."""
    cfg = cfg or MetricConfig()
    t = np.asarray(t, dtype=float)
    x = np.asarray(positions, dtype=float)
    n = len(t)
    if n < 3:
        raise AnalysisError(f"log too short for analysis: {n} samples, need >= 3")
    duration = float(t[-1] - t[0])
    if duration <= 0:
        raise AnalysisError("zero-duration log")
    dt = duration / (n - 1)

    if cfg.filter_hz is not None:
        x = _lowpass(x, dt, cfg.filter_hz)

    steps = np.linalg.norm(np.diff(x, axis=0), axis=1)
    path_length = float(np.sum(steps))
    if path_length < _TINY_PATH:
        return EffortProfile(0.0, 0.0, 0.0, 0.0, 0.0)

    chord = float(np.linalg.norm(x[-1] - x[0]))
    directness = chord / path_length

    vel = np.gradient(x, dt, axis=0, edge_order=2)
    speed = np.linalg.norm(vel, axis=1)
    max_speed = float(np.max(speed))
    if max_speed > 0:
        slope = float(np.polyfit(t, speed, 1)[0])
        temporal_skew = float(np.clip(slope * duration / max_speed, -1.0, 1.0))
    else:
        temporal_skew = 0.0

    weight_index = float(np.clip(max_speed / cfg.speed_ref, 0.0, 1.0))

    jerk_sq = _jerk_squared_integral(x, dt)
    smoothness_ldj = float(-np.log(duration**5 / path_length**2 * jerk_sq)) if jerk_sq > 0 else 0.0

    up = _AXIS_INDEX[cfg.up_axis]
    drop = float(np.clip((x[0, up] - x[-1, up]) / path_length, -1.0, 1.0))

    return EffortProfile(directness, temporal_skew, weight_index, smoothness_ldj, drop)


def compute_profile(
    log: TrajectoryLog, model: RobotModel, cfg: Optional[MetricConfig] = None
) -> EffortProfile:
    """Effort profile of an executed joint log, via forward kinematics of the
    recorded actual joint positions."""
    if log.n_samples < 3:
        raise AnalysisError(f"log too short for analysis: {log.n_samples} samples, need >= 3")
    positions = np.array(
        [forward_kinematics(model, q).position for q in log.q_actual]
    )
    return profile_from_path(log.t, positions, cfg)


def metric_series(
    log: TrajectoryLog, model: RobotModel, cfg: Optional[MetricConfig] = None
) -> dict:
    """Per-sample end-effector speed and jerk magnitude (same derivative
    pipeline as the profile), for plotting/export."""
    cfg = cfg or MetricConfig()
    if log.n_samples < 3:
        raise AnalysisError(f"log too short for analysis: {log.n_samples} samples, need >= 3")
    x = np.array([forward_kinematics(model, q).position for q in log.q_actual])
    dt = 1.0 / log.rate
    if cfg.filter_hz is not None:
        x = _lowpass(x, dt, cfg.filter_hz)
    vel = np.gradient(x, dt, axis=0, edge_order=2)
    acc = np.gradient(vel, dt, axis=0, edge_order=2)
    jerk = np.gradient(acc, dt, axis=0, edge_order=2)
    return {
        "t": log.t.copy(),
        "speed": np.linalg.norm(vel, axis=1),
        "jerk_magnitude": np.linalg.norm(jerk, axis=1),
    }


def classify(
    profile: EffortProfile, thresholds: Optional[MetricConfig] = None
) -> TonalityClassification:
    """Rule-based tonality assignment; boundaries belong to the stronger
    category (>= comparisons as written)."""
    cfg = thresholds or MetricConfig()

    if profile.directness >= cfg.directness_unidirectional:
        spatial = SpatialTonality.UNIDIRECTIONAL
    elif profile.directness <= cfg.directness_multidirectional:
        spatial = SpatialTonality.MULTIDIRECTIONAL
    else:
        spatial = SpatialTonality.NEUTRAL

    if profile.temporal_skew >= cfg.skew_accelerated:
        temporal = TemporalTonality.ACCELERATED
    elif profile.temporal_skew <= cfg.skew_decelerated:
        temporal = TemporalTonality.DECELERATED
    else:
        temporal = TemporalTonality.NEUTRAL

    if profile.weight_index >= cfg.weight_strong:
        weight = WeightTonality.STRONG
    elif (
        profile.vertical_drop_ratio >= cfg.drop_heavy
        and profile.smoothness_ldj < cfg.flow_unhindered_ldj
    ):
        weight = WeightTonality.HEAVY
    else:
        weight = WeightTonality.LIGHT

    flow = (
        FlowTonality.UNHINDERED
        if profile.smoothness_ldj >= cfg.flow_unhindered_ldj
        else FlowTonality.CONTROLLED
    )

    return TonalityClassification(spatial, temporal, weight, flow, cfg.to_dict())


_DIMENSIONS = ("spatial", "temporal", "weight", "flow")


@dataclass(frozen=True)
class MoaReport:
    """Three-part analysis record: free-text impressions, the machine-computed
    parameter analysis, and a free-text meaning slot with consistency flags
    against the designer's intended tonalities."""

    profile: EffortProfile
    classification: TonalityClassification
    impressions: Optional[str] = None
    meaning: Optional[str] = None
    intended: Optional[dict] = None
    inconsistencies: tuple = ()

    def to_dict(self) -> dict:
        return {
            "impressions": self.impressions,
            "analysis": {
                "profile": self.profile.to_dict(),
                "classification": self.classification.to_dict(),
            },
            "meaning": self.meaning,
            "intended": self.intended,
            "inconsistencies": list(self.inconsistencies),
        }

    def render_text(self) -> str:
        cls = self.classification
        lines = [
            "movement analysis report",
            "=" * 24,
            "",
            "[1] subjective impressions",
            f"    {self.impressions or '(none recorded)'}",
            "",
            "[2] movement parameter analysis",
            f"    directness:          {self.profile.directness:.4f}",
            f"    temporal skew:       {self.profile.temporal_skew:+.4f}",
            f"    weight index:        {self.profile.weight_index:.4f}",
            f"    smoothness (LDJ):    {self.profile.smoothness_ldj:.4f}",
            f"    vertical drop ratio: {self.profile.vertical_drop_ratio:+.4f}",
            f"    spatial:  {cls.spatial.value}",
            f"    temporal: {cls.temporal.value}",
            f"    weight:   {cls.weight.value}",
            f"    flow:     {cls.flow.value}",
            "",
            "[3] construction of meaning",
            f"    {self.meaning or '(none recorded)'}",
        ]
        if self.intended:
            lines.append("")
            lines.append("    intended vs classified:")
            for dim in _DIMENSIONS:
                if dim not in self.intended:
                    continue
                got = getattr(cls, dim).value
                want = str(self.intended[dim]).lower()
                mark = "MISMATCH" if dim in self.inconsistencies else "ok"
                lines.append(f"      {dim}: intended {want}, classified {got} [{mark}]")
        return "\n".join(lines) + "\n"


def build_report(
    profile: EffortProfile,
    classification: TonalityClassification,
    impressions: Optional[str] = None,
    meaning: Optional[str] = None,
    intended: Optional[dict] = None,
) -> MoaReport:
    """Assemble the report; intended tonalities (dimension -> label) that
    differ from the classified ones are flagged."""
    flags = []
    if intended:
        unknown = set(intended) - set(_DIMENSIONS)
        if unknown:
            raise ValueError(f"unknown tonality dimensions: {sorted(unknown)}")
        for dim in _DIMENSIONS:
            if dim in intended:
                want = str(intended[dim]).lower()
                got = getattr(classification, dim).value
                if want != got:
                    flags.append(dim)
    return MoaReport(
        profile=profile,
        classification=classification,
        impressions=impressions,
        meaning=meaning,
        intended=dict(intended) if intended else None,
        inconsistencies=tuple(flags),
    )


def analyze_log(
    log: TrajectoryLog,
    model: RobotModel,
    cfg: Optional[MetricConfig] = None,
    impressions: Optional[str] = None,
    meaning: Optional[str] = None,
    intended: Optional[dict] = None,
) -> MoaReport:
    """One-call pipeline: profile, classify, report."""
    cfg = cfg or MetricConfig()
    profile = compute_profile(log, model, cfg)
    classification = classify(profile, cfg)
    return build_report(profile, classification, impressions, meaning, intended)
