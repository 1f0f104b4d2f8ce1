// Export-equality contract: timeline edits made by the UI must serialize to
// exactly the bytes the core library produces for the same operations.
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  channelValue,
  deleteKeyframe,
  duplicateSegment,
  duration,
  evaluate,
  insertKeyframe,
  sequenceFromDict,
  sequenceToCanonicalJson,
  timeScale,
  TimelineError,
} from "../src/timeline.js";

const cases = JSON.parse(
  readFileSync(new URL("./fixtures/timeline_cases.json", import.meta.url), "utf-8"),
) as {
  base: string;
  time_scale_x2: string;
  time_scale_quarter_window: string;
  duplicate_at_4: string;
  insert_joint1_at_1: string;
  replace_joint0_at_1p25: string;
  eval_times: number[];
  eval_channel0: number[];
  eval_gripper: number[];
};

const load = () => sequenceFromDict(JSON.parse(cases.base));

describe("byte equality with core-library edits", () => {
  it("round-trips the base sequence byte-for-byte", () => {
    expect(sequenceToCanonicalJson(load())).toBe(cases.base);
  });

  it("time_scale x2 over the whole range", () => {
    const edited = timeScale(load(), 0.0, 2.5, 2.0);
    expect(sequenceToCanonicalJson(edited)).toBe(cases.time_scale_x2);
  });

  it("time_scale 0.25 over an inner window", () => {
    const edited = timeScale(load(), 0.5, 1.5, 0.25);
    expect(sequenceToCanonicalJson(edited)).toBe(cases.time_scale_quarter_window);
  });

  it("duplicate_segment pasted at t=4", () => {
    const edited = duplicateSegment(load(), 0.0, 2.5, 4.0);
    expect(sequenceToCanonicalJson(edited)).toBe(cases.duplicate_at_4);
  });

  it("insert on a fresh time", () => {
    const edited = insertKeyframe(load(), 1, { t: 1.0, value: 0.33, interp: "linear" });
    expect(sequenceToCanonicalJson(edited)).toBe(cases.insert_joint1_at_1);
  });

  it("insert replacing an existing key", () => {
    const edited = insertKeyframe(load(), 0, { t: 1.25, value: 0.5, interp: "linear" });
    expect(sequenceToCanonicalJson(edited)).toBe(cases.replace_joint0_at_1p25);
  });
});

describe("evaluate parity with the core curves", () => {
  it("matches core channel values at sampled times", () => {
    const seq = load();
    cases.eval_times.forEach((t, i) => {
      expect(channelValue(seq.channels[0], t)).toBeCloseTo(cases.eval_channel0[i], 12);
      expect(channelValue(seq.channels[2], t)).toBeCloseTo(cases.eval_gripper[i], 12);
    });
  });

  it("preview passes exactly through keyframe values", () => {
    const seq = load();
    for (const channel of seq.channels) {
      for (const key of channel.keys) {
        expect(channelValue(channel, key.t)).toBe(key.value);
      }
    }
  });

  it("evaluates absent joints to zero", () => {
    const { q, gripper } = evaluate(load(), 0.8, 4);
    expect(q).toHaveLength(4);
    expect(q[2]).toBe(0);
    expect(q[3]).toBe(0);
    expect(gripper).toBeGreaterThanOrEqual(0);
  });
});

describe("edit guards", () => {
  it("rejects out-of-limit values with the core's message", () => {
    expect(() =>
      insertKeyframe(load(), 0, { t: 0.6, value: 3.5, interp: "linear" }, { low: -2.9, high: 2.9 }),
    ).toThrow("value 3.5 outside limits [-2.9, 2.9] for target 0");
  });

  it("rejects pastes over existing keys", () => {
    expect(() => duplicateSegment(load(), 0.0, 1.25, 2.0)).toThrow(TimelineError);
  });

  it("rejects non-positive scale factors", () => {
    expect(() => timeScale(load(), 0, 1, 0)).toThrow(/scale factor/);
  });

  it("deleting a missing key fails", () => {
    expect(() => deleteKeyframe(load(), 0, 0.123)).toThrow(/no keyframe/);
  });

  it("keeps keys sorted and unique through an edit chain", () => {
    let seq = load();
    seq = insertKeyframe(seq, 0, { t: 0.9, value: 0.2, interp: "linear" });
    seq = duplicateSegment(seq, 0.0, 2.5, 5.0);
    seq = timeScale(seq, 0.0, 5.0, 0.8);
    for (const c of seq.channels) {
      const times = c.keys.map((k) => k.t);
      expect([...times].sort((a, b) => a - b)).toEqual(times);
      expect(new Set(times).size).toBe(times.length);
    }
    expect(duration(seq)).toBeGreaterThan(0);
  });
});
