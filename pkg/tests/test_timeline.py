import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motion_studio.timeline import (
    GRIPPER,
    Channel,
    Interp,
    Keyframe,
    Sequence,
    TimelineError,
    channel_value,
    delete_keyframe,
    duplicate_segment,
    evaluate,
    insert_keyframe,
    sample,
    sequence_from_dict,
    sequence_to_canonical_json,
    sequence_to_dict,
    time_scale,
    validate_sequence,
)


def seq_with(keys, target=0, name="test", robot="twolink"):
    return Sequence(name=name, robot=robot, channels=(Channel(target, tuple(keys)),))


def linear_ramp():
    return seq_with([Keyframe(0.0, 0.0), Keyframe(2.0, 1.0)])


class TestEvaluate:
    def test_linear_midpoint(self):
        q, _ = evaluate(linear_ramp(), 1.0, 1)
        assert q[0] == pytest.approx(0.5, abs=1e-15)

    def test_exact_keyframe_values(self):
        seq = seq_with([Keyframe(0.0, 0.3), Keyframe(1.5, -0.2), Keyframe(2.0, 0.9)])
        for t, v in ((0.0, 0.3), (1.5, -0.2), (2.0, 0.9)):
            q, _ = evaluate(seq, t, 1)
            assert q[0] == v

    def test_bezier_symmetric_flat_handles(self):
        seq = seq_with(
            [
                Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(0.5, 0.0)),
                Keyframe(2.0, 1.0, handle_in=(0.5, 0.0)),
            ]
        )
        q, _ = evaluate(seq, 1.0, 1)
        assert q[0] == pytest.approx(0.5, abs=1e-9)

    def test_bezier_default_handles_symmetric(self):
        seq = seq_with([Keyframe(0.0, 0.0, Interp.BEZIER), Keyframe(2.0, 1.0)])
        q, _ = evaluate(seq, 1.0, 1)
        assert q[0] == pytest.approx(0.5, abs=1e-9)

    def test_step_holds_left_value(self):
        seq = seq_with([Keyframe(0.0, 0.2, Interp.STEP), Keyframe(1.0, 0.8)])
        q, _ = evaluate(seq, 0.999, 1)
        assert q[0] == 0.2

    def test_hold_outside_range(self):
        seq = seq_with([Keyframe(0.5, 0.3), Keyframe(1.0, 0.7)])
        assert evaluate(seq, 0.0, 1)[0][0] == 0.3
        assert evaluate(seq, 5.0, 1)[0][0] == 0.7

    def test_absent_channel_holds_zero(self):
        seq = seq_with([Keyframe(0.0, 0.4), Keyframe(1.0, 0.6)], target=2)
        q, grip = evaluate(seq, 0.5, 4)
        assert q[0] == 0.0 and q[1] == 0.0 and q[3] == 0.0
        assert grip == 0.0

    def test_gripper_channel(self):
        seq = Sequence(
            "g",
            "twolink",
            (Channel(GRIPPER, (Keyframe(0.0, 0.0), Keyframe(1.0, 1.0))),),
        )
        _, grip = evaluate(seq, 0.25, 1)
        assert grip == pytest.approx(0.25)

    def test_negative_time_rejected(self):
        with pytest.raises(TimelineError):
            evaluate(linear_ramp(), -0.1, 1)

    def test_continuity_linear_and_bezier(self):
        seq = seq_with(
            [
                Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(0.3, 0.2)),
                Keyframe(1.0, 1.0, Interp.LINEAR, handle_in=(0.2, 0.1)),
                Keyframe(2.0, -0.5),
            ]
        )
        eps = 1e-9
        for t in (0.25, 0.5, 1.0 - 2 * eps, 1.0, 1.3, 2.0 - 2 * eps):
            a = channel_value(seq.channels[0], t)
            b = channel_value(seq.channels[0], t + eps)
            assert abs(a - b) < 1e-6

    def test_c1_with_matching_tangents(self):
        # in/out handle slopes equal at the middle key -> numerically C1.
        seq = seq_with(
            [
                Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(0.4, 0.1)),
                Keyframe(
                    1.0, 0.5, Interp.BEZIER, handle_in=(0.3, 0.15), handle_out=(0.2, 0.1)
                ),
                Keyframe(2.0, 0.2, handle_in=(0.3, 0.15)),
            ]
        )
        ch = seq.channels[0]
        eps = 1e-7
        left_slope = (channel_value(ch, 1.0) - channel_value(ch, 1.0 - eps)) / eps
        right_slope = (channel_value(ch, 1.0 + eps) - channel_value(ch, 1.0)) / eps
        assert abs(left_slope - right_slope) < 1e-6


class TestEdits:
    def test_insert_fresh_key(self):
        seq = insert_keyframe(linear_ramp(), 0, Keyframe(1.0, 0.2))
        ch = seq.channels[0]
        assert len(ch.keys) == 3
        assert [k.t for k in ch.keys] == [0.0, 1.0, 2.0]

    def test_insert_replaces_same_time(self):
        seq = insert_keyframe(linear_ramp(), 0, Keyframe(2.0, 0.4))
        ch = seq.channels[0]
        assert len(ch.keys) == 2
        assert ch.keys[-1].value == 0.4

    def test_insert_beyond_limits_rejected(self, twolink):
        with pytest.raises(TimelineError):
            insert_keyframe(linear_ramp(), 0, Keyframe(1.0, 3.5), model=twolink)
        with pytest.raises(TimelineError):
            insert_keyframe(linear_ramp(), GRIPPER, Keyframe(1.0, 1.5), model=twolink)

    def test_delete(self):
        seq = delete_keyframe(linear_ramp(), 0, 2.0)
        assert len(seq.channels[0].keys) == 1

    def test_delete_missing_key(self):
        with pytest.raises(TimelineError):
            delete_keyframe(linear_ramp(), 0, 1.23)

    def test_duplicate_shifts_keys(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(1.0, 0.5), Keyframe(2.0, 1.0)])
        out = duplicate_segment(seq, 0.0, 2.0, 4.0)
        times = [k.t for k in out.channels[0].keys]
        assert times == [0.0, 1.0, 2.0, 4.0, 5.0, 6.0]
        assert out.duration == 6.0

    def test_duplicate_empty_segment_is_identity(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(5.0, 1.0)])
        out = duplicate_segment(seq, 1.0, 2.0, 10.0)
        assert out == seq

    def test_duplicate_overlap_rejected(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(1.0, 0.5), Keyframe(3.0, 1.0)])
        with pytest.raises(TimelineError):
            duplicate_segment(seq, 0.0, 1.0, 2.5)

    def test_duplicate_evaluate_oracle(self):
        seq = seq_with(
            [
                Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(0.3, 0.1)),
                Keyframe(1.0, 0.7, Interp.BEZIER, handle_in=(0.2, 0.05), handle_out=(0.3, -0.1)),
                Keyframe(2.0, 0.2, handle_in=(0.4, 0.0)),
            ]
        )
        out = duplicate_segment(seq, 0.0, 2.0, 5.0)
        for t in np.linspace(0.0, 2.0, 41):
            src = channel_value(seq.channels[0], float(t))
            dst = channel_value(out.channels[0], float(t) + 5.0)
            assert abs(src - dst) < 1e-12

    def test_time_scale_moves_keys(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(2.0, 1.0)])
        out = time_scale(seq, 0.0, 2.0, 2.0)
        assert [k.t for k in out.channels[0].keys] == [0.0, 4.0]

    def test_time_scale_identity(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(1.0, 0.3), Keyframe(2.0, 1.0)])
        assert time_scale(seq, 0.0, 2.0, 1.0) == seq

    def test_time_scale_shifts_later_keys(self):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(1.0, 0.3), Keyframe(3.0, 1.0)])
        out = time_scale(seq, 0.0, 1.0, 2.0)
        assert [k.t for k in out.channels[0].keys] == [0.0, 2.0, 4.0]

    def test_time_scale_evaluate_oracle(self):
        seq = seq_with(
            [
                Keyframe(0.0, 0.1, Interp.BEZIER, handle_out=(0.5, 0.2)),
                Keyframe(2.0, 0.9, handle_in=(0.6, 0.1)),
            ]
        )
        out = time_scale(seq, 0.0, 2.0, 0.5)
        for t in np.linspace(0.0, 2.0, 21):
            src = channel_value(seq.channels[0], float(t))
            dst = channel_value(out.channels[0], float(t) * 0.5)
            assert abs(src - dst) < 1e-8

    def test_time_scale_bad_factor(self):
        with pytest.raises(TimelineError):
            time_scale(linear_ramp(), 0.0, 1.0, 0.0)
        with pytest.raises(TimelineError):
            time_scale(linear_ramp(), 0.0, 1.0, -1.0)


class TestSample:
    def test_row_count(self):
        log = sample(linear_ramp(), 100.0)
        assert log.n_samples == 201

    def test_constant_channel(self):
        seq = seq_with([Keyframe(0.0, 0.4), Keyframe(2.0, 0.4)])
        log = sample(seq, 50.0)
        assert np.all(log.q_ref == 0.4)

    def test_linear_matches_closed_form(self):
        log = sample(linear_ramp(), 100.0)
        expected = np.clip(log.t / 2.0, 0.0, 1.0)
        np.testing.assert_allclose(log.q_ref[:, 0], expected, atol=1e-12)


class TestSerialization:
    def test_round_trip(self):
        seq = Sequence(
            "demo",
            "twolink",
            (
                Channel(
                    0,
                    (
                        Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(0.3, 0.1)),
                        Keyframe(1.0, 0.5, handle_in=(0.2, 0.05)),
                    ),
                ),
                Channel(GRIPPER, (Keyframe(0.0, 0.0), Keyframe(1.0, 1.0, Interp.STEP))),
            ),
        )
        clone = sequence_from_dict(sequence_to_dict(seq))
        assert clone == seq

    def test_unknown_version_rejected(self):
        data = sequence_to_dict(linear_ramp())
        data["version"] = 99
        with pytest.raises(TimelineError, match="version"):
            sequence_from_dict(data)

    def test_error_names_channel(self):
        data = sequence_to_dict(linear_ramp())
        del data["channels"][0]["keys"][0]["t"]
        with pytest.raises(TimelineError, match=r"channels\[0\]"):
            sequence_from_dict(data)

    def test_canonical_json_parses_and_is_stable(self):
        seq = seq_with([Keyframe(0.0, 0.25), Keyframe(1.5, -1.0)])
        text = sequence_to_canonical_json(seq)
        assert sequence_from_dict(json.loads(text)) == seq
        # integer-valued floats are written the way ECMAScript renders them
        assert '"t":0,' in text and '"v":-1' in text

    def test_validate_names_offending_key(self, twolink):
        seq = seq_with([Keyframe(0.0, 0.0), Keyframe(1.0, 3.2)])
        with pytest.raises(TimelineError, match=r"channels\[0\].*keys\[1\]"):
            validate_sequence(seq, twolink)

    def test_validate_rejects_unknown_joint(self, twolink):
        seq = seq_with([Keyframe(0.0, 0.0)], target=7)
        with pytest.raises(TimelineError, match="7"):
            validate_sequence(seq, twolink)


class TestChannelInvariants:
    def test_unsorted_keys_rejected(self):
        with pytest.raises(TimelineError):
            Channel(0, (Keyframe(1.0, 0.0), Keyframe(0.5, 0.0)))

    def test_duplicate_times_rejected(self):
        with pytest.raises(TimelineError):
            Channel(0, (Keyframe(1.0, 0.0), Keyframe(1.0, 0.1)))

    def test_handle_crossing_neighbour_rejected(self):
        with pytest.raises(TimelineError):
            Channel(
                0,
                (
                    Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(2.0, 0.0)),
                    Keyframe(1.0, 1.0),
                ),
            )

    def test_negative_handle_dt_rejected(self):
        with pytest.raises(TimelineError):
            Keyframe(0.0, 0.0, Interp.BEZIER, handle_out=(-0.1, 0.0))

    def test_one_channel_per_target(self):
        with pytest.raises(TimelineError):
            Sequence(
                "dup",
                "twolink",
                (Channel(0, (Keyframe(0.0, 0.0),)), Channel(0, (Keyframe(1.0, 0.0),))),
            )


# -- randomized edit streams -------------------------------------------------

_times = st.floats(min_value=0.0, max_value=30.0, allow_nan=False, allow_infinity=False).map(
    lambda t: round(t, 3)
)
_values = st.floats(min_value=-2.5, max_value=2.5, allow_nan=False).map(lambda v: round(v, 4))


@st.composite
def edit_ops(draw):
    kind = draw(st.sampled_from(["insert", "delete", "duplicate", "scale"]))
    if kind == "insert":
        return ("insert", draw(_times), draw(_values))
    if kind == "delete":
        return ("delete", draw(_times))
    if kind == "duplicate":
        t0 = draw(_times)
        length = draw(st.floats(min_value=0.001, max_value=5.0).map(lambda v: round(v, 3)))
        paste = draw(_times)
        return ("duplicate", t0, t0 + length, paste)
    t0 = draw(_times)
    length = draw(st.floats(min_value=0.001, max_value=5.0).map(lambda v: round(v, 3)))
    factor = draw(st.floats(min_value=0.1, max_value=8.0).map(lambda v: round(v, 3)))
    return ("scale", t0, t0 + length, factor)


@settings(max_examples=60, deadline=None)
@given(st.lists(edit_ops(), max_size=25))
def test_random_edit_streams_preserve_invariants(ops):
    seq = Sequence("fuzz", "twolink", (Channel(0, (Keyframe(0.0, 0.0),)),))
    for op in ops:
        try:
            if op[0] == "insert":
                seq = insert_keyframe(seq, 0, Keyframe(op[1], op[2]))
            elif op[0] == "delete":
                seq = delete_keyframe(seq, 0, op[1])
            elif op[0] == "duplicate":
                seq = duplicate_segment(seq, op[1], op[2], op[3])
            else:
                seq = time_scale(seq, op[1], op[2], op[3])
        except TimelineError:
            continue  # rejected edits must leave the sequence untouched
        for ch in seq.channels:
            times = [k.t for k in ch.keys]
            assert times == sorted(times)
            assert len(set(times)) == len(times)
            assert all(t >= 0 for t in times)
        assert seq.duration == max((k.t for c in seq.channels for k in c.keys), default=0.0)
