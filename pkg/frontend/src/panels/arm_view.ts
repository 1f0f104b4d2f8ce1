// 3-D arm view: draws the kinematic chain link by link from the model
// description in hello, at the joint angles of the latest snapshot. Plain
// canvas with an orbiting orthographic camera; drag to rotate, wheel to zoom.
import { framePosition, linkFrames, type Vec3 } from "../kinematics.js";
import type { StudioSession } from "../socket.js";

const SINGULARITY_WARN = 1e-2;

export class ArmView {
  private ctx: CanvasRenderingContext2D;
  private yaw = 0.9;
  private pitch = 0.45;
  private zoom = 160; // px per meter
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(
    private canvas: HTMLCanvasElement,
    private session: StudioSession,
    private badge: HTMLElement,
    private faultBanner: HTMLElement,
  ) {
    this.ctx = canvas.getContext("2d")!;
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      this.yaw += (e.clientX - this.lastX) * 0.01;
      this.pitch = Math.max(-1.4, Math.min(1.4, this.pitch + (e.clientY - this.lastY) * 0.01));
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    canvas.addEventListener("pointerup", () => (this.dragging = false));
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.zoom = Math.max(40, Math.min(600, this.zoom * (e.deltaY < 0 ? 1.1 : 0.9)));
    });
  }

  private project(p: Vec3): [number, number] {
    const cy = Math.cos(this.yaw), sy = Math.sin(this.yaw);
    const cp = Math.cos(this.pitch), sp = Math.sin(this.pitch);
    // yaw about world z, then pitch the camera; z is up on screen
    const x1 = cy * p[0] + sy * p[1];
    const y1 = -sy * p[0] + cy * p[1];
    const z1 = p[2];
    const yc = cp * y1 + sp * z1;
    const zc = -sp * y1 + cp * z1;
    void yc;
    return [
      this.canvas.width / 2 + x1 * this.zoom,
      this.canvas.height * 0.62 - zc * this.zoom,
    ];
  }

  render(now: number): void {
    const { ctx, canvas } = this;
    const state = this.session.state;
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    this.drawGround();

    const stale = this.session.stale(now);
    this.badge.textContent = stale ? "STALE" : "live";
    this.badge.className = stale ? "badge stale" : "badge live";

    const snap = state.snapshot;
    const model = state.hello?.model;
    if (!snap || !model) return;

    const frames = linkFrames(model, snap.q);
    const points = frames.map((f) => this.project(framePosition(f)));

    ctx.lineWidth = 6;
    ctx.lineCap = "round";
    for (let i = 1; i < points.length; i++) {
      ctx.strokeStyle = i === points.length - 1 ? "#7fc4ff" : "#4f8fd0";
      ctx.beginPath();
      ctx.moveTo(points[i - 1][0], points[i - 1][1]);
      ctx.lineTo(points[i][0], points[i][1]);
      ctx.stroke();
    }
    const nearSingular = snap.manipulability < SINGULARITY_WARN;
    for (const [i, [x, y]] of points.entries()) {
      ctx.beginPath();
      ctx.arc(x, y, i === points.length - 1 ? 7 : 5, 0, Math.PI * 2);
      ctx.fillStyle = i === points.length - 1 && nearSingular ? "#ff5470" : "#dce6f2";
      ctx.fill();
    }
    // gripper opening indicator at the tip
    const tip = points[points.length - 1];
    ctx.strokeStyle = "#9fe8a0";
    ctx.lineWidth = 2;
    const gap = 4 + snap.gripper * 10;
    ctx.strokeRect(tip[0] - gap, tip[1] - 12, 2 * gap, 8);

    ctx.fillStyle = nearSingular ? "#ff5470" : "#8fa3bb";
    ctx.font = "12px monospace";
    ctx.fillText(`manipulability ${snap.manipulability.toExponential(2)}`, 12, 20);
    ctx.fillText(`mode ${snap.mode}${snap.playing ? ` (${snap.playing})` : ""}`, 12, 36);
    ctx.fillText(`t ${snap.t.toFixed(2)} s`, 12, 52);

    if (snap.fault) {
      this.faultBanner.textContent = `fault: ${snap.fault.replace("_", " ")}`;
      this.faultBanner.style.display = "block";
    } else {
      this.faultBanner.style.display = "none";
    }
  }

  private drawGround(): void {
    const { ctx } = this;
    ctx.strokeStyle = "#1d2430";
    ctx.lineWidth = 1;
    const extent = 1.6;
    for (let i = -4; i <= 4; i++) {
      const a = this.project([(i / 4) * extent, -extent, 0]);
      const b = this.project([(i / 4) * extent, extent, 0]);
      const c = this.project([-extent, (i / 4) * extent, 0]);
      const d = this.project([extent, (i / 4) * extent, 0]);
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.moveTo(c[0], c[1]);
      ctx.lineTo(d[0], d[1]);
      ctx.stroke();
    }
  }
}
