"""Access to the JSON configs shipped inside the package (robot models,
default bindings, metric defaults)."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .arm_model import RobotModel, load_robot_model
from .moa_metrics import MetricConfig
from .teleop import BindingMap


def builtin_path(filename: str) -> Path:
    base = resources.files("motion_studio") / "configs" / filename
    with resources.as_file(base) as path:
        return Path(path)


def builtin_model(name: str) -> RobotModel:
    """Load one of the shipped robot configs: 'twolink', 'articulated3',
    'gen3lite_like'."""
    return load_robot_model(builtin_path(f"{name}.json"))


def default_bindings() -> BindingMap:
    return BindingMap(json.loads(builtin_path("default_bindings.json").read_text()))


def default_metric_config() -> MetricConfig:
    return MetricConfig.from_dict(json.loads(builtin_path("metric_defaults.json").read_text()))
