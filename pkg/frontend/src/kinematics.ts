// Client-side forward kinematics for rendering. Mirrors the server's link
// convention (Rz(theta + offset) * Tz(d) * Tx(a) * Rx(alpha)); authoritative
// poses always come from snapshots, this exists so the arm can be drawn
// link by link and is contract-tested against server poses.
import type { ModelDescription } from "./protocol.js";

export type Mat4 = Float64Array; // row-major 4x4
export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // x, y, z, w

export function identity(): Mat4 {
  const m = new Float64Array(16);
  m[0] = m[5] = m[10] = m[15] = 1;
  return m;
}

export function matMul(a: Mat4, b: Mat4): Mat4 {
  const out = new Float64Array(16);
  for (let r = 0; r < 4; r++) {
    for (let c = 0; c < 4; c++) {
      let acc = 0;
      for (let k = 0; k < 4; k++) acc += a[r * 4 + k] * b[k * 4 + c];
      out[r * 4 + c] = acc;
    }
  }
  return out;
}

function linkTransform(
  joint: ModelDescription["joints"][number],
  theta: number,
): Mat4 {
  const ct = Math.cos(theta + joint.theta_offset);
  const st = Math.sin(theta + joint.theta_offset);
  const ca = Math.cos(joint.alpha);
  const sa = Math.sin(joint.alpha);
  // prettier-ignore
  return new Float64Array([
    ct, -st * ca,  st * sa, joint.a * ct,
    st,  ct * ca, -ct * sa, joint.a * st,
    0,   sa,       ca,      joint.d,
    0,   0,        0,       1,
  ]);
}

/** Cumulative frames [base, joint1, ..., jointN] in the base frame. */
export function linkFrames(model: ModelDescription, q: readonly number[]): Mat4[] {
  if (q.length !== model.joints.length) {
    throw new Error(`expected ${model.joints.length} joint values, got ${q.length}`);
  }
  const frames = [identity()];
  let current = identity();
  model.joints.forEach((joint, i) => {
    current = matMul(current, linkTransform(joint, q[i]));
    frames.push(current);
  });
  return frames;
}

export function framePosition(m: Mat4): Vec3 {
  return [m[3], m[7], m[11]];
}

/** Unit quaternion (x, y, z, w) of the frame's rotation block. */
export function frameQuaternion(m: Mat4): Quat {
  const r00 = m[0], r01 = m[1], r02 = m[2];
  const r10 = m[4], r11 = m[5], r12 = m[6];
  const r20 = m[8], r21 = m[9], r22 = m[10];
  const trace = r00 + r11 + r22;
  let x: number, y: number, z: number, w: number;
  if (trace > 0) {
    const s = Math.sqrt(trace + 1) * 2;
    w = s / 4;
    x = (r21 - r12) / s;
    y = (r02 - r20) / s;
    z = (r10 - r01) / s;
  } else if (r00 > r11 && r00 > r22) {
    const s = Math.sqrt(1 + r00 - r11 - r22) * 2;
    w = (r21 - r12) / s;
    x = s / 4;
    y = (r01 + r10) / s;
    z = (r02 + r20) / s;
  } else if (r11 > r22) {
    const s = Math.sqrt(1 + r11 - r00 - r22) * 2;
    w = (r02 - r20) / s;
    x = (r01 + r10) / s;
    y = s / 4;
    z = (r12 + r21) / s;
  } else {
    const s = Math.sqrt(1 + r22 - r00 - r11) * 2;
    w = (r10 - r01) / s;
    x = (r02 + r20) / s;
    y = (r12 + r21) / s;
    z = s / 4;
  }
  return [x, y, z, w];
}

export interface ClientPose {
  position: Vec3;
  orientation: Quat;
}

export function forwardKinematics(model: ModelDescription, q: readonly number[]): ClientPose {
  const frames = linkFrames(model, q);
  const tip = frames[frames.length - 1];
  return { position: framePosition(tip), orientation: frameQuaternion(tip) };
}

/** Angle between two unit quaternions, sign-insensitive (q and -q coincide). */
export function quaternionAngle(a: Quat, b: Quat): number {
  const dot = Math.abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
  return 2 * Math.acos(Math.min(1, dot));
}
