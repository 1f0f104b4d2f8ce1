from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motion_studio.arm_model import jacobian
from motion_studio.resources import default_bindings
from motion_studio.teleop import (
    BindingError,
    BindingMap,
    ControlMode,
    FaultKind,
    InputEvent,
    TeleopConfig,
    apply_inertia,
    goto_preset,
    initial_state,
    load_events,
    process_input,
    resolve_velocity,
    save_events,
)

BINDINGS = BindingMap(
    {
        "stick_y": "joint_drive",
        "stick_cx": "cart_x",
        "stick_cy": "cart_y",
        "stick_cz": "cart_z",
        "btn_mode": "mode_toggle",
        "btn_up": "speed_up",
        "btn_down": "speed_down",
        "btn_next": "joint_next",
        "btn_inertia": "inertia_toggle",
        "btn_clear": "fault_clear",
        "btn_open": "gripper_open",
        "btn_home": "preset:home",
    }
)


def press(state, button, t=0.0):
    return process_input(state, InputEvent.button_press(button, t), BINDINGS)


def move(state, axis, value, t=0.0):
    return process_input(state, InputEvent.axis_move(axis, value, t), BINDINGS)


class TestProcessInput:
    def test_mode_toggle_preserves_everything_else(self, twolink):
        state = initial_state(twolink)
        state = move(state, "stick_y", 0.7)
        toggled = press(state, "btn_mode")
        assert toggled.mode is ControlMode.CARTESIAN
        assert toggled.axes == state.axes
        assert toggled.selected_joint == state.selected_joint
        assert toggled.joint_speed_scale == state.joint_speed_scale
        back = press(toggled, "btn_mode")
        assert back.mode is ControlMode.JOINT

    def test_unknown_binding_leaves_state_unchanged(self, twolink):
        state = initial_state(twolink)
        after = process_input(state, InputEvent.button_press("btn_unknown", 9.0), BINDINGS)
        assert after == state

    def test_axis_values_clamped(self, twolink):
        state = move(initial_state(twolink), "stick_y", 7.5)
        assert state.axis("joint_drive") == 1.0
        state = move(state, "stick_y", -3.0)
        assert state.axis("joint_drive") == -1.0

    def test_speed_scale_clamps_to_unit_interval(self, twolink):
        state = initial_state(twolink)
        for _ in range(12):
            state = press(state, "btn_up")
        assert state.joint_speed_scale == 1.0
        for _ in range(20):
            state = press(state, "btn_down")
        assert state.joint_speed_scale == 0.0

    def test_speed_scale_is_per_mode(self, twolink):
        state = press(initial_state(twolink), "btn_up")
        assert state.joint_speed_scale == pytest.approx(0.6)
        assert state.cart_speed_scale == pytest.approx(0.5)
        state = press(state, "btn_mode")
        state = press(state, "btn_down")
        assert state.cart_speed_scale == pytest.approx(0.4)
        assert state.joint_speed_scale == pytest.approx(0.6)

    def test_joint_selection_cycles(self, twolink):
        state = initial_state(twolink)
        state = press(state, "btn_next")
        assert state.selected_joint == 1
        state = press(state, "btn_next")
        assert state.selected_joint == 0

    def test_fault_clear(self, twolink):
        state = replace(initial_state(twolink), fault=FaultKind.NEAR_SINGULARITY)
        state = press(state, "btn_clear")
        assert state.fault is None

    def test_preset_request(self, twolink):
        state = press(initial_state(twolink), "btn_home")
        assert state.pending_preset == "home"

    def test_gripper_steps(self, twolink):
        state = initial_state(twolink)
        state = press(state, "btn_open")
        assert state.gripper_cmd == pytest.approx(0.1)

    def test_inertia_toggle(self, twolink):
        state = press(initial_state(twolink), "btn_inertia")
        assert state.inertia_enabled
        assert not press(state, "btn_inertia").inertia_enabled

    def test_last_event_time_tracked(self, twolink):
        state = move(initial_state(twolink), "stick_y", 0.2, t=4.25)
        assert state.last_event_t == 4.25


class TestResolveVelocity:
    def test_joint_mode_drives_selected_joint(self, twolink):
        state = initial_state(twolink)
        state = press(state, "btn_next")  # joint 1, vel_limit 2.5
        state = move(state, "stick_y", 1.0)
        for _ in range(5):
            state = press(state, "btn_up")  # scale -> 1.0, then clamp
        v, state = resolve_velocity(state, twolink, [0.0, 0.0])
        assert v[0] == 0.0
        assert v[1] == pytest.approx(1.0 * 1.0 * 2.5)

    def test_zero_scale_annihilates(self, twolink):
        state = initial_state(twolink)
        for _ in range(10):
            state = press(state, "btn_down")
        state = move(state, "stick_y", 0.5)
        v, _ = resolve_velocity(state, twolink, [0.0, 0.0])
        assert np.all(v == 0.0)

    def test_fault_latches_zero_velocity(self, twolink):
        state = initial_state(twolink)
        state = move(state, "stick_y", 1.0)
        state = replace(state, fault=FaultKind.NEAR_SINGULARITY)
        v, after = resolve_velocity(state, twolink, [0.0, 1.0])
        assert np.all(v == 0.0)
        cleared = press(after, "btn_clear")
        assert cleared.fault is None
        v2, _ = resolve_velocity(cleared, twolink, [0.0, 1.0])
        assert v2[0] != 0.0

    def test_cartesian_twist_reproduced_through_jacobian(self, twolink):
        cfg = TeleopConfig()
        state = initial_state(twolink)
        state = press(state, "btn_mode")
        state = move(state, "stick_cy", 0.8)
        q = [0.0, np.pi / 2]
        v, _ = resolve_velocity(state, twolink, q, cfg)
        expected_twist = np.zeros(6)
        expected_twist[1] = 0.8 * cfg.cart_lin_speed * state.cart_speed_scale
        achieved = jacobian(twolink, q) @ v
        np.testing.assert_allclose(achieved, expected_twist, atol=1e-6)

    def test_cartesian_at_singularity_faults(self, twolink):
        state = initial_state(twolink)
        state = press(state, "btn_mode")
        state = move(state, "stick_cy", 0.5)
        v, after = resolve_velocity(state, twolink, [0.3, 0.0])  # fully extended
        assert np.all(v == 0.0)
        assert after.fault is FaultKind.NEAR_SINGULARITY

    def test_velocity_respects_limits(self, twolink):
        cfg = TeleopConfig(cart_lin_speed=50.0)  # absurd twist demand
        state = initial_state(twolink)
        state = press(state, "btn_mode")
        for _ in range(5):
            state = press(state, "btn_up")
        state = move(state, "stick_cy", 1.0)
        v, _ = resolve_velocity(state, twolink, [0.0, np.pi / 2], cfg)
        assert np.all(np.abs(v) <= twolink.vel_limits + 1e-12)


class TestApplyInertia:
    def test_disabled_is_bypass(self):
        out = apply_inertia([0.0], [1.0], 0.1, 1.0, enabled=False)
        assert out[0] == 1.0

    def test_full_step_clamp(self):
        out = apply_inertia([0.0], [1.0], 1.0, 1.0, enabled=True)
        assert out[0] == 1.0

    def test_first_order_lag(self):
        out = apply_inertia([0.0], [1.0], 0.1, 1.0, enabled=True)
        assert out[0] == pytest.approx(0.1, abs=1e-15)

    def test_bad_dt_rejected(self):
        with pytest.raises(ValueError):
            apply_inertia([0.0], [1.0], 0.0, 1.0, enabled=True)


class TestGotoPreset:
    def test_duration_floor(self, twolink):
        request = goto_preset(twolink, "home", [0.0, 0.0])
        assert request.duration == 1.0
        np.testing.assert_allclose(request.target, [0.0, 0.0])

    def test_duration_formula(self):
        from conftest import make_single_joint

        model = make_single_joint(limits=(-12.0, 12.0), vel_limit=2.0)
        model = model.__class__(model.name, model.joints, model.gripper_range, {"far": (8.0,)})
        request = goto_preset(model, "far", [0.0])
        assert request.duration == pytest.approx(8.0)  # 8 rad / (0.5 * 2 rad/s)

    def test_unknown_preset(self, twolink):
        with pytest.raises(KeyError):
            goto_preset(twolink, "foo", [0.0, 0.0])


class TestBindings:
    def test_default_map_covers_described_capabilities(self):
        bindings = default_bindings()
        actions = set(bindings.bindings.values())
        for needed in (
            "mode_toggle",
            "speed_up",
            "speed_down",
            "joint_next",
            "fault_clear",
            "inertia_toggle",
            "gripper_open",
            "gripper_close",
            "joint_drive",
        ):
            assert needed in actions
        assert any(a.startswith("preset:") for a in actions)

    def test_unknown_action_rejected(self):
        with pytest.raises(BindingError):
            BindingMap({"x": "warp_drive"})


class TestEventsFile:
    def test_round_trip(self, tmp_path):
        events = [
            InputEvent.axis_move("stick_y", 0.5, 0.1),
            InputEvent.button_press("btn_mode", 0.2),
            InputEvent.button_release("btn_mode", 0.3),
        ]
        path = tmp_path / "events.json"
        save_events(events, path)
        assert load_events(path) == events

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "events.json"
        path.write_text('{"version": 9, "events": []}')
        with pytest.raises(ValueError, match="version"):
            load_events(path)


_events = st.one_of(
    st.builds(
        InputEvent.axis_move,
        st.sampled_from(["stick_y", "stick_cx", "stick_cy"]),
        st.floats(min_value=-2, max_value=2, allow_nan=False),
        st.floats(min_value=0, max_value=10, allow_nan=False),
    ),
    st.builds(
        InputEvent.button_press,
        st.sampled_from(["btn_mode", "btn_up", "btn_down", "btn_next", "btn_clear", "zzz"]),
        st.floats(min_value=0, max_value=10, allow_nan=False),
    ),
)


@settings(max_examples=50, deadline=None)
@given(st.lists(_events, max_size=40))
def test_event_streams_are_deterministic(events):
    from motion_studio.resources import builtin_model

    model = builtin_model("twolink")
    a = initial_state(model)
    b = initial_state(model)
    for e in events:
        a = process_input(a, e, BINDINGS)
    for e in events:
        b = process_input(b, e, BINDINGS)
    assert a == b
    va, _ = resolve_velocity(a, model, [0.2, 0.9])
    vb, _ = resolve_velocity(b, model, [0.2, 0.9])
    assert np.array_equal(va, vb)
    assert np.all(np.abs(va) <= model.vel_limits + 1e-12)
