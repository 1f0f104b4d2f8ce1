// Client-side mirror of the core timeline semantics. Edits made in the UI
// must export byte-for-byte the same canonical JSON as the core library, so
// every operation here follows the exact arithmetic (and error messages) of
// the server implementation; the contract tests pin that equality against
// recorded fixtures.
import type { SequenceJson } from "./protocol.js";

export type Interp = "step" | "linear" | "bezier";
export type Target = number | "gripper";

export interface Keyframe {
  t: number;
  value: number;
  interp: Interp;
  handleIn?: [number, number];
  handleOut?: [number, number];
}

export interface Channel {
  target: Target;
  keys: Keyframe[]; // strictly time-sorted, unique times
}

export interface Sequence {
  name: string;
  robot: string;
  channels: Channel[];
}

export interface JointLimits {
  low: number;
  high: number;
}

export class TimelineError extends Error {}

const BEZIER_MAX_ITERS = 120;

function pyRepr(target: Target): string {
  return typeof target === "number" ? String(target) : `'${target}'`;
}

export function duration(seq: Sequence): number {
  let out = 0;
  for (const c of seq.channels) {
    if (c.keys.length) out = Math.max(out, c.keys[c.keys.length - 1].t);
  }
  return out;
}

export function getChannel(seq: Sequence, target: Target): Channel | undefined {
  return seq.channels.find((c) => c.target === target);
}

function checkChannel(channel: Channel): void {
  const times = channel.keys.map((k) => k.t);
  for (let i = 1; i < times.length; i++) {
    if (times[i] - times[i - 1] <= 0) {
      throw new TimelineError(
        `channel ${pyRepr(channel.target)}: keyframe times must be strictly increasing`,
      );
    }
  }
  for (let i = 0; i + 1 < channel.keys.length; i++) {
    const left = channel.keys[i];
    const right = channel.keys[i + 1];
    const span = right.t - left.t;
    if (left.interp === "bezier") {
      const outDt = left.handleOut ? left.handleOut[0] : span / 3.0;
      const inDt = right.handleIn ? right.handleIn[0] : span / 3.0;
      if (outDt > span || inDt > span) {
        throw new TimelineError(
          `channel ${pyRepr(channel.target)}: handle at t=${left.t} or t=${right.t} ` +
            `crosses the neighbouring keyframe`,
        );
      }
    }
  }
}

function bezierPoints(left: Keyframe, right: Keyframe) {
  const span = right.t - left.t;
  const outH = left.handleOut ?? [span / 3.0, 0.0];
  const inH = right.handleIn ?? [span / 3.0, 0.0];
  const x = [left.t, left.t + outH[0], right.t - inH[0], right.t] as const;
  const y = [left.value, left.value + outH[1], right.value - inH[1], right.value] as const;
  return { x, y };
}

function cubic(p0: number, p1: number, p2: number, p3: number, u: number): number {
  const w = 1.0 - u;
  return w * w * w * p0 + 3.0 * w * w * u * p1 + 3.0 * w * u * u * p2 + u * u * u * p3;
}

function bezierValue(left: Keyframe, right: Keyframe, t: number): number {
  const { x, y } = bezierPoints(left, right);
  let lo = 0.0;
  let hi = 1.0;
  for (let i = 0; i < BEZIER_MAX_ITERS; i++) {
    const mid = 0.5 * (lo + hi);
    if (mid === lo || mid === hi) break;
    if (cubic(x[0], x[1], x[2], x[3], mid) < t) lo = mid;
    else hi = mid;
  }
  const u = 0.5 * (lo + hi);
  return cubic(y[0], y[1], y[2], y[3], u);
}

/** Curve value at time t; holds first/last values outside the key range. */
export function channelValue(channel: Channel, t: number): number {
  const keys = channel.keys;
  if (!keys.length) return 0.0;
  if (t <= keys[0].t) return keys[0].value;
  if (t >= keys[keys.length - 1].t) return keys[keys.length - 1].value;
  let i = keys.length - 1;
  for (let k = 1; k < keys.length; k++) {
    if (keys[k].t > t) {
      i = k;
      break;
    }
  }
  const left = keys[i - 1];
  const right = keys[i];
  if (t === left.t) return left.value;
  if (left.interp === "step") return left.value;
  if (left.interp === "linear") {
    const frac = (t - left.t) / (right.t - left.t);
    return left.value + frac * (right.value - left.value);
  }
  return bezierValue(left, right, t);
}

export function evaluate(seq: Sequence, t: number, nJoints: number): { q: number[]; gripper: number } {
  if (t < 0) throw new TimelineError(`evaluation time must be >= 0, got ${t}`);
  const q = new Array<number>(nJoints).fill(0);
  let gripper = 0;
  for (const c of seq.channels) {
    if (c.target === "gripper") gripper = channelValue(c, t);
    else if (c.target < nJoints) q[c.target] = channelValue(c, t);
  }
  return { q, gripper };
}

function withChannel(seq: Sequence, channel: Channel): Sequence {
  checkChannel(channel);
  const exists = seq.channels.some((c) => c.target === channel.target);
  let channels = exists
    ? seq.channels.map((c) => (c.target === channel.target ? channel : c))
    : [...seq.channels, channel];
  if (!channel.keys.length) channels = channels.filter((c) => c.target !== channel.target);
  return { ...seq, channels };
}

export function insertKeyframe(
  seq: Sequence,
  target: Target,
  key: Keyframe,
  limits?: JointLimits,
): Sequence {
  if (key.t < 0 || !Number.isFinite(key.t)) {
    throw new TimelineError(`keyframe time must be finite and >= 0, got ${key.t}`);
  }
  if (limits && !(limits.low <= key.value && key.value <= limits.high)) {
    throw new TimelineError(
      `value ${key.value} outside limits [${limits.low}, ${limits.high}] for target ${pyRepr(target)}`,
    );
  }
  const channel = getChannel(seq, target) ?? { target, keys: [] };
  const keys = channel.keys.filter((k) => k.t !== key.t);
  keys.push({ ...key });
  keys.sort((a, b) => a.t - b.t);
  return withChannel(seq, { target, keys });
}

export function deleteKeyframe(seq: Sequence, target: Target, t: number): Sequence {
  const channel = getChannel(seq, target);
  if (!channel || channel.keys.every((k) => k.t !== t)) {
    throw new TimelineError(`no keyframe at t=${t} on channel ${pyRepr(target)}`);
  }
  return withChannel(seq, { target, keys: channel.keys.filter((k) => k.t !== t) });
}

export function duplicateSegment(
  seq: Sequence,
  t0: number,
  t1: number,
  pasteAt: number,
): Sequence {
  if (!(0 <= t0 && t0 < t1)) throw new TimelineError(`need 0 <= t0 < t1, got [${t0}, ${t1}]`);
  if (pasteAt < 0) throw new TimelineError("paste_at must be >= 0");
  const shift = pasteAt - t0;
  const windowEnd = pasteAt + (t1 - t0);
  let out = seq;
  for (const c of seq.channels) {
    const copied = c.keys.filter((k) => t0 <= k.t && k.t <= t1);
    if (!copied.length) continue;
    const clash = c.keys.filter((k) => pasteAt <= k.t && k.t <= windowEnd).map((k) => k.t);
    if (clash.length) {
      throw new TimelineError(
        `paste window [${pasteAt}, ${windowEnd}] overlaps existing keys ` +
          `at [${clash.join(", ")}] on channel ${pyRepr(c.target)}`,
      );
    }
    const keys = [...c.keys, ...copied.map((k) => ({ ...k, t: k.t + shift }))];
    keys.sort((a, b) => a.t - b.t);
    out = withChannel(out, { target: c.target, keys });
  }
  return out;
}

function scaleHandle(
  h: [number, number] | undefined,
  factor: number,
): [number, number] | undefined {
  return h === undefined ? undefined : [h[0] * factor, h[1]];
}

export function timeScale(seq: Sequence, t0: number, t1: number, factor: number): Sequence {
  if (factor <= 0) throw new TimelineError(`scale factor must be > 0, got ${factor}`);
  if (!(0 <= t0 && t0 < t1)) throw new TimelineError(`need 0 <= t0 < t1, got [${t0}, ${t1}]`);
  const shift = (factor - 1.0) * (t1 - t0);
  const channels = seq.channels.map((c) => {
    const keys = c.keys.map((k) => {
      if (t0 <= k.t && k.t <= t1) {
        return {
          ...k,
          t: t0 + factor * (k.t - t0),
          handleIn: scaleHandle(k.handleIn, factor),
          handleOut: scaleHandle(k.handleOut, factor),
        };
      }
      if (k.t > t1) return { ...k, t: k.t + shift };
      return { ...k };
    });
    const channel = { target: c.target, keys };
    checkChannel(channel);
    return channel;
  });
  return { ...seq, channels };
}

// -- interchange format -------------------------------------------------------

export function sequenceToDict(seq: Sequence): SequenceJson {
  return {
    version: 1,
    name: seq.name,
    robot: seq.robot,
    channels: seq.channels.map((c) => ({
      target: c.target,
      keys: c.keys.map((k) => {
        const entry: SequenceJson["channels"][number]["keys"][number] = {
          t: k.t,
          v: k.value,
          interp: k.interp,
        };
        if (k.handleIn) entry.h_in = k.handleIn;
        if (k.handleOut) entry.h_out = k.handleOut;
        return entry;
      }),
    })),
  };
}

export function sequenceFromDict(data: SequenceJson): Sequence {
  if (data.version !== 1) {
    throw new TimelineError(
      `unsupported sequence format version ${data.version}; this build reads version 1`,
    );
  }
  const seq: Sequence = {
    name: data.name,
    robot: data.robot,
    channels: data.channels.map((c) => ({
      target: c.target,
      keys: c.keys.map((k) => ({
        t: k.t,
        value: k.v,
        interp: k.interp,
        handleIn: k.h_in ? ([k.h_in[0], k.h_in[1]] as [number, number]) : undefined,
        handleOut: k.h_out ? ([k.h_out[0], k.h_out[1]] as [number, number]) : undefined,
      })),
    })),
  };
  seq.channels.forEach(checkChannel);
  return seq;
}

function canonicalValue(value: unknown): string {
  if (value === null || typeof value === "boolean") return JSON.stringify(value);
  if (typeof value === "number") return String(value); // shortest round trip
  if (typeof value === "string") return JSON.stringify(value);
  if (Array.isArray(value)) return `[${value.map(canonicalValue).join(",")}]`;
  const obj = value as Record<string, unknown>;
  const body = Object.keys(obj)
    .sort()
    .map((k) => `${JSON.stringify(k)}:${canonicalValue(obj[k])}`)
    .join(",");
  return `{${body}}`;
}

/** Canonical byte-stable export, identical to the core library's rendering. */
export function sequenceToCanonicalJson(seq: Sequence): string {
  return canonicalValue(sequenceToDict(seq));
}
