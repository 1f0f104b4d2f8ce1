#!/usr/bin/env python3
"""Record contract fixtures for the frontend tests from the core package.

Produces, under frontend/tests/fixtures/:
  server_messages.json  one live-captured envelope per server message type
  fk_cases.json         joint configurations with server-side poses
  timeline_cases.json   canonical sequence bytes before/after core edits,
                        plus sampled curve values

Rerun after protocol or timeline changes: python3 scripts/make_fixtures.py
"""
import asyncio
import json
import sys
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

from conftest import TcpStudioClient, running_server, tcp_port  # noqa: E402

from motion_studio.arm_model import forward_kinematics  # noqa: E402
from motion_studio.resources import builtin_model  # noqa: E402
from motion_studio.timeline import (  # noqa: E402
    Channel,
    Interp,
    Keyframe,
    Sequence,
    channel_value,
    duplicate_segment,
    insert_keyframe,
    sequence_to_canonical_json,
    sequence_to_dict,
    time_scale,
)


def fk_fixture() -> dict:
    cases = []
    for model_name in ("twolink", "gen3lite_like"):
        model = builtin_model(model_name)
        rng = np.random.default_rng(2024)
        qs = [model.preset(p) for p in sorted(model.presets)]
        qs += [rng.uniform(model.limits_low, model.limits_high) for _ in range(8)]
        for q in qs:
            pose = forward_kinematics(model, q)
            cases.append(
                {
                    "model": model_name,
                    "q": [float(x) for x in q],
                    "position": pose.position.tolist(),
                    "orientation": pose.orientation.tolist(),
                }
            )
    return {
        "models": {
            name: builtin_model(name).to_dict() for name in ("twolink", "gen3lite_like")
        },
        "cases": cases,
    }


def base_sequence() -> Sequence:
    return Sequence(
        "uiedit",
        "twolink",
        (
            Channel(
                0,
                (
                    Keyframe(0.0, 0.1, Interp.BEZIER, handle_out=(0.3, 0.25)),
                    Keyframe(1.25, 0.7, Interp.BEZIER, handle_in=(0.35, 0.1), handle_out=(0.2, -0.05)),
                    Keyframe(2.5, -0.4, handle_in=(0.5, 0.05)),
                ),
            ),
            Channel(1, (Keyframe(0.0, 0.0), Keyframe(2.0, -0.8, Interp.STEP))),
            Channel("gripper", (Keyframe(0.5, 0.0), Keyframe(2.0, 1.0))),
        ),
    )


def timeline_fixture() -> dict:
    seq = base_sequence()
    scaled = time_scale(seq, 0.0, 2.5, 2.0)
    shrunk = time_scale(seq, 0.5, 1.5, 0.25)
    dup = duplicate_segment(seq, 0.0, 2.5, 4.0)
    inserted = insert_keyframe(seq, 1, Keyframe(1.0, 0.33))
    replaced = insert_keyframe(seq, 0, Keyframe(1.25, 0.5))
    eval_times = [0.0, 0.1, 0.33, 0.619, 1.0, 1.25, 1.9, 2.2, 2.5, 3.0]
    return {
        "base": sequence_to_canonical_json(seq),
        "time_scale_x2": sequence_to_canonical_json(scaled),
        "time_scale_quarter_window": sequence_to_canonical_json(shrunk),
        "duplicate_at_4": sequence_to_canonical_json(dup),
        "insert_joint1_at_1": sequence_to_canonical_json(inserted),
        "replace_joint0_at_1p25": sequence_to_canonical_json(replaced),
        "eval_times": eval_times,
        "eval_channel0": [channel_value(seq.channels[0], t) for t in eval_times],
        "eval_gripper": [channel_value(seq.channels[2], t) for t in eval_times],
    }


async def record_server_messages() -> dict:
    model = builtin_model("twolink")
    captured: dict[str, dict] = {}

    def keep(env) -> None:
        captured.setdefault(env.type, env.to_dict())

    async with running_server(model) as server:
        a = await TcpStudioClient.connect(tcp_port(server))
        b = await TcpStudioClient.connect(tcp_port(server))
        keep(await a.recv_type("hello"))
        keep(await b.recv_type("hello"))

        await a.send("pilot_acquire")
        keep(await a.recv_type("pilot_granted"))
        await b.send("pilot_acquire")
        keep(await b.recv_type("pilot_denied"))
        await b.send("input", {"kind": "axis", "id": "axis.left_y", "value": 0.4})
        keep(await b.recv_type("not_pilot"))

        await a.send("seq_upload", {"sequence": sequence_to_dict(base_sequence())})
        keep(await a.recv_type("ok"))
        await a.send("seq_play", {})
        ok = await a.recv_type("ok")
        log_id = ok.payload["log_id"]
        await a.send("seq_play", {})
        keep(await a.recv_type("busy"))
        keep(await a.recv_type("play_done", timeout=60.0))
        keep(await a.recv_type("snapshot"))

        await a.send("log_fetch", {"log_id": log_id})
        keep(await a.recv_type("log"))
        await a.send(
            "analyze",
            {"log_id": log_id, "intended": {"spatial": "unidirectional"}, "impressions": "sweep"},
        )
        keep(await a.recv_type("report"))
        await a.send("config_get")
        keep(await a.recv_type("config"))
        await a.send("preset_goto", {"name": "elbow_up"})
        await a.recv_type("ok")
        keep(await a.recv_type("preset_done", timeout=60.0))
        await a.send("log_fetch", {"log_id": "missing"})
        keep(await a.recv_type("error"))
        await a.send("pilot_release")
        keep(await a.recv_type("pilot_released"))
        await a.close()
        await b.close()
    return captured


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "fk_cases.json").write_text(json.dumps(fk_fixture(), indent=1) + "\n")
    (FIXTURES / "timeline_cases.json").write_text(json.dumps(timeline_fixture(), indent=1) + "\n")
    messages = asyncio.run(record_server_messages())
    (FIXTURES / "server_messages.json").write_text(
        json.dumps(messages, indent=1, sort_keys=True) + "\n"
    )
    print(f"wrote fixtures to {FIXTURES}")
    print(f"captured server message types: {sorted(messages)}")


if __name__ == "__main__":
    main()
