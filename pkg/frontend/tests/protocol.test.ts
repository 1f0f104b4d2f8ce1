// Contract tests: every recorded server envelope validates against the UI's
// schemas, and everything the UI emits validates against the documented
// client schemas.
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  clientPayloadSchemas,
  decodeServerMessage,
  encodeClientMessage,
  envelopeSchema,
  serverPayloadSchemas,
  type ClientMessageType,
} from "../src/protocol.js";

const fixtures = JSON.parse(
  readFileSync(new URL("./fixtures/server_messages.json", import.meta.url), "utf-8"),
) as Record<string, { type: string; seq_no: number; payload: unknown }>;

describe("recorded server messages", () => {
  it("covers every documented server type", () => {
    expect(Object.keys(fixtures).sort()).toEqual(Object.keys(serverPayloadSchemas).sort());
  });

  for (const [type, envelope] of Object.entries(fixtures)) {
    it(`validates a live ${type} envelope`, () => {
      const env = decodeServerMessage(JSON.stringify(envelope));
      expect(env.type).toBe(type);
      expect(envelopeSchema.parse(envelope).seq_no).toBeGreaterThan(0);
    });
  }

  it("rejects unknown message types", () => {
    expect(() =>
      decodeServerMessage(JSON.stringify({ type: "teleport", seq_no: 1, payload: {} })),
    ).toThrow(/unknown server message/);
  });

  it("rejects a snapshot with a malformed pose", () => {
    const snap = structuredClone(fixtures.snapshot);
    (snap.payload as { ee_pose: { position: number[] } }).ee_pose.position = [1, 2];
    expect(() => decodeServerMessage(JSON.stringify(snap))).toThrow();
  });
});

describe("emitted client messages", () => {
  const samples: [ClientMessageType, unknown][] = [
    ["pilot_acquire", {}],
    ["pilot_release", {}],
    ["input", { kind: "axis", id: "axis.left_y", value: 0.5 }],
    ["input", { kind: "press", id: "button.options" }],
    ["mode_set", { mode: "teleop" }],
    ["preset_goto", { name: "home" }],
    ["fault_clear", {}],
    ["seq_play", { name: "wave" }],
    ["seq_stop", {}],
    ["log_fetch", { log_id: "wave#1" }],
    ["analyze", { log_id: "wave#1", intended: { spatial: "unidirectional" } }],
    ["config_get", {}],
  ];

  for (const [type, payload] of samples) {
    it(`encodes a valid ${type} message`, () => {
      const raw = encodeClientMessage(type, 3, payload);
      const parsed = envelopeSchema.parse(JSON.parse(raw));
      expect(parsed.type).toBe(type);
      expect(parsed.seq_no).toBe(3);
      clientPayloadSchemas[type].parse(parsed.payload);
    });
  }

  it("refuses to emit an out-of-schema payload", () => {
    expect(() => encodeClientMessage("mode_set", 1, { mode: "warp" })).toThrow();
    expect(() =>
      encodeClientMessage("input", 1, { kind: "axis", id: "x", value: Number.NaN }),
    ).toThrow();
  });

  it("uploads the fixture sequence through the seq_upload schema", () => {
    const timeline = JSON.parse(
      readFileSync(new URL("./fixtures/timeline_cases.json", import.meta.url), "utf-8"),
    ) as { base: string };
    const sequence = JSON.parse(timeline.base);
    const raw = encodeClientMessage("seq_upload", 9, { sequence });
    expect(JSON.parse(raw).payload.sequence.name).toBe("uiedit");
  });
});
