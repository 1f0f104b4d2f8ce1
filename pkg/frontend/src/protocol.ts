// Wire protocol (version 1): JSON envelopes over a WebSocket. Every message
// the UI emits or consumes is validated against these schemas; the server
// side documents the same contract in PROTOCOL.md.
import { z } from "zod";

export const PROTOCOL_VERSION = 1;

const finite = z.number().finite();

export const poseSchema = z.object({
  position: z.array(finite).length(3),
  orientation: z.array(finite).length(4), // quaternion (x, y, z, w)
});

export const jointSchema = z.object({
  a: finite,
  alpha: finite,
  d: finite,
  theta_offset: finite,
  limits: z.tuple([finite, finite]),
  vel_limit: finite,
  inertia: finite,
  damping: finite,
});

export const modelSchema = z.object({
  name: z.string(),
  gripper_range: z.tuple([finite, finite]),
  joints: z.array(jointSchema).min(1),
  presets: z.record(z.array(finite)),
});

export const teleopMirrorSchema = z.object({
  control_mode: z.enum(["joint", "cartesian"]),
  selected_joint: z.number().int().nonnegative(),
  joint_speed_scale: finite,
  cart_speed_scale: finite,
  inertia_enabled: z.boolean(),
  gripper_cmd: finite,
});

export const snapshotSchema = z.object({
  t: finite,
  q: z.array(finite),
  qd: z.array(finite),
  gripper: finite,
  ee_pose: poseSchema,
  mode: z.enum(["idle", "teleop", "playing"]),
  fault: z.enum(["near_singularity", "joint_limit", "command_timeout"]).nullable(),
  manipulability: finite,
  teleop: teleopMirrorSchema,
  playing: z.string().optional(),
});

export const helloSchema = z.object({
  protocol_version: z.literal(PROTOCOL_VERSION),
  model: modelSchema,
  broadcast_rate: finite,
  bindings: z.record(z.string()),
});

export const keyframeSchema = z.object({
  t: finite,
  v: finite,
  interp: z.enum(["step", "linear", "bezier"]),
  h_in: z.tuple([finite, finite]).optional(),
  h_out: z.tuple([finite, finite]).optional(),
});

export const sequenceSchema = z.object({
  version: z.literal(1),
  name: z.string(),
  robot: z.string(),
  channels: z.array(
    z.object({
      target: z.union([z.number().int().nonnegative(), z.literal("gripper")]),
      keys: z.array(keyframeSchema),
    }),
  ),
});

export const profileSchema = z.object({
  directness: finite,
  temporal_skew: finite,
  weight_index: finite,
  smoothness_ldj: finite,
  vertical_drop_ratio: finite,
});

export const classificationSchema = z.object({
  spatial: z.enum(["unidirectional", "multidirectional", "neutral"]),
  temporal: z.enum(["accelerated", "decelerated", "neutral"]),
  weight: z.enum(["light", "strong", "heavy"]),
  flow: z.enum(["controlled", "unhindered"]),
  thresholds_used: z.record(z.unknown()),
});

export const reportSchema = z.object({
  impressions: z.string().nullable(),
  analysis: z.object({
    profile: profileSchema,
    classification: classificationSchema,
  }),
  meaning: z.string().nullable(),
  intended: z.record(z.string()).nullable(),
  inconsistencies: z.array(z.string()),
});

export const logSchema = z.object({
  rate: finite,
  t: z.array(finite),
  q_ref: z.array(z.array(finite)),
  q_actual: z.array(z.array(finite)),
  qd_actual: z.array(z.array(finite)),
  gripper: z.array(finite),
  metadata: z.record(z.unknown()),
});

export const inputEventSchema = z.object({
  kind: z.enum(["axis", "press", "release"]),
  id: z.string(),
  value: finite.optional(),
});

const reason = z.object({ reason: z.string() });

// Payload schema per message type, both directions.
export const serverPayloadSchemas = {
  hello: helloSchema,
  snapshot: snapshotSchema,
  ok: z.record(z.unknown()),
  error: reason,
  busy: reason,
  not_pilot: reason,
  pilot_granted: z.object({}).passthrough(),
  pilot_denied: reason,
  pilot_released: z.object({}).passthrough(),
  play_done: z.object({ name: z.string(), log_id: z.string() }),
  preset_done: z.object({ name: z.string() }),
  log: z.object({ log_id: z.string(), log: logSchema }),
  report: z.object({ log_id: z.string(), report: reportSchema }),
  config: z
    .object({ protocol_version: z.literal(PROTOCOL_VERSION), model: modelSchema })
    .passthrough(),
} as const;

export const clientPayloadSchemas = {
  pilot_acquire: z.object({}).strict(),
  pilot_release: z.object({}).strict(),
  input: inputEventSchema,
  mode_set: z.object({ mode: z.enum(["teleop", "idle"]) }),
  preset_goto: z.object({ name: z.string() }),
  fault_clear: z.object({}).strict(),
  seq_upload: z.object({ sequence: sequenceSchema }),
  seq_play: z.object({ name: z.string().optional(), record_rate: finite.optional() }),
  seq_stop: z.object({}).strict(),
  log_fetch: z.object({ log_id: z.string() }),
  analyze: z.object({
    log_id: z.string(),
    config: z.record(z.unknown()).optional(),
    impressions: z.string().optional(),
    meaning: z.string().optional(),
    intended: z.record(z.string()).optional(),
  }),
  config_get: z.object({}).strict(),
} as const;

export type ServerMessageType = keyof typeof serverPayloadSchemas;
export type ClientMessageType = keyof typeof clientPayloadSchemas;

export interface Envelope {
  type: string;
  seq_no: number;
  payload?: unknown;
  reply_to?: number;
}

export const envelopeSchema = z.object({
  type: z.string(),
  seq_no: z.number().int().nonnegative(),
  payload: z.unknown().optional(),
  reply_to: z.number().int().optional(),
});

export type Hello = z.infer<typeof helloSchema>;
export type Snapshot = z.infer<typeof snapshotSchema>;
export type ModelDescription = z.infer<typeof modelSchema>;
export type SequenceJson = z.infer<typeof sequenceSchema>;
export type Report = z.infer<typeof reportSchema>;
export type InputEventJson = z.infer<typeof inputEventSchema>;

export function decodeServerMessage(raw: string): Envelope {
  const env = envelopeSchema.parse(JSON.parse(raw));
  const schema = serverPayloadSchemas[env.type as ServerMessageType];
  if (!schema) throw new Error(`unknown server message type ${env.type}`);
  schema.parse(env.payload);
  return env as Envelope;
}

// Validates the payload before it goes on the wire; contract tests break if
// the UI ever emits a shape the server does not document.
export function encodeClientMessage(
  type: ClientMessageType,
  seqNo: number,
  payload: unknown,
): string {
  clientPayloadSchemas[type].parse(payload);
  const env: Envelope = { type, seq_no: seqNo, payload };
  return JSON.stringify(env);
}
