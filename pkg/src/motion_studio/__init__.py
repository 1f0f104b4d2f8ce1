"""Expressive-motion design toolbox for a simulated serial arm: kinematics,
teleoperation, keyframe timelines, PD playback, movement-quality analysis and
a streaming server."""

from .arm_model import (
    ConfigError,
    IkOptions,
    IkResult,
    JointSpec,
    OutOfReachError,
    Pose,
    RobotModel,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    load_robot_model,
    manipulability,
)
from .moa_metrics import (
    AnalysisError,
    EffortProfile,
    MetricConfig,
    MoaReport,
    TonalityClassification,
    analyze_log,
    build_report,
    classify,
    compute_profile,
    profile_from_path,
)
from .sim_exec import (
    ControllerGains,
    MotionRuntime,
    SimMode,
    SimState,
    play_sequence,
    replay_events,
    run_teleop_tick,
    step,
)
from .teleop import (
    BindingMap,
    ControlMode,
    FaultKind,
    InputEvent,
    TeleopConfig,
    TeleopState,
    apply_inertia,
    goto_preset,
    process_input,
    resolve_velocity,
)
from .timeline import (
    Channel,
    Interp,
    Keyframe,
    Sequence,
    TimelineError,
    delete_keyframe,
    duplicate_segment,
    evaluate,
    insert_keyframe,
    load_sequence,
    sample,
    save_sequence,
    time_scale,
)
from .trajectory_log import TrajectoryLog

__version__ = "0.1.0"
