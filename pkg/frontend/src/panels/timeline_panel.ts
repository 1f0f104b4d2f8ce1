// Timeline editor: one curve lane per channel, draggable keyframes and Bezier
// handles, a segment selection with duplicate / time-scale actions that map
// one-to-one onto the core edit operations, and an evaluate-preview overlay.
import type { StudioSession } from "../socket.js";
import {
  channelValue,
  duplicateSegment,
  duration,
  insertKeyframe,
  deleteKeyframe,
  sequenceToCanonicalJson,
  timeScale,
  TimelineError,
  type Channel,
  type JointLimits,
  type Keyframe,
  type Sequence,
  type Target,
} from "../timeline.js";

const EPS = 1e-6; // neighbour clamp when dragging keys past each other
const LANE_H = 86;
const PAD_L = 46;

interface DragState {
  channel: number;
  key: number;
  part: "key" | "h_in" | "h_out";
}

export class TimelinePanel {
  private ctx: CanvasRenderingContext2D;
  private drag: DragState | null = null;
  private selection: { t0: number; t1: number } | null = null;
  private selecting = false;
  private status: HTMLElement;

  constructor(
    private canvas: HTMLCanvasElement,
    private session: StudioSession,
    controls: HTMLElement,
  ) {
    this.ctx = canvas.getContext("2d")!;
    this.status = document.createElement("span");
    this.status.className = "tl-status";
    this.buildControls(controls);
    canvas.addEventListener("pointerdown", (e) => this.onDown(e));
    canvas.addEventListener("pointermove", (e) => this.onMove(e));
    canvas.addEventListener("pointerup", () => this.onUp());
    canvas.addEventListener("dblclick", (e) => this.onDouble(e));
  }

  private seq(): Sequence | null {
    return this.session.state.sequence;
  }

  private limitsFor(target: Target): JointLimits | undefined {
    const model = this.session.state.hello?.model;
    if (!model) return undefined;
    if (target === "gripper") return { low: model.gripper_range[0], high: model.gripper_range[1] };
    const joint = model.joints[target];
    return joint ? { low: joint.limits[0], high: joint.limits[1] } : undefined;
  }

  private report(msg: string, isError = false): void {
    this.status.textContent = msg;
    this.status.className = isError ? "tl-status error" : "tl-status";
  }

  private apply(edit: (seq: Sequence) => Sequence, label: string): void {
    const seq = this.seq();
    if (!seq) return;
    try {
      this.session.setSequence(edit(seq));
      this.report(label);
    } catch (err) {
      // same wording as the core validation, surfaced inline
      this.report(err instanceof TimelineError ? err.message : String(err), true);
    }
  }

  private buildControls(root: HTMLElement): void {
    const button = (label: string, onClick: () => void) => {
      const b = document.createElement("button");
      b.textContent = label;
      b.addEventListener("click", onClick);
      root.appendChild(b);
      return b;
    };
    button("duplicate segment", () => {
      if (!this.selection) return this.report("select a segment first (shift-drag)", true);
      const { t0, t1 } = this.selection;
      const seq = this.seq();
      if (!seq) return;
      this.apply((s) => duplicateSegment(s, t0, t1, duration(seq) + 0.5), "segment duplicated");
    });
    button("scale x2", () => this.scaleSelection(2.0));
    button("scale x0.5", () => this.scaleSelection(0.5));
    button("upload", () => {
      this.session
        .uploadSequence()
        .then((env) => this.report(env.type === "ok" ? "uploaded" : "upload rejected", env.type !== "ok"))
        .catch((err) => this.report(String(err), true));
    });
    button("play", () => {
      this.session
        .playSequence()
        .then((env) => this.report(env.type === "ok" ? "playing" : `rejected: ${env.type}`, env.type !== "ok"))
        .catch((err) => this.report(String(err), true));
    });
    button("export", () => {
      const seq = this.seq();
      if (!seq) return;
      const blob = new Blob([sequenceToCanonicalJson(seq) + "\n"], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `${seq.name}.seq.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    });
    const file = document.createElement("input");
    file.type = "file";
    file.accept = ".json";
    file.addEventListener("change", async () => {
      const chosen = file.files?.[0];
      if (!chosen) return;
      try {
        this.session.loadSequence(JSON.parse(await chosen.text()));
        this.report(`loaded ${chosen.name}`);
      } catch (err) {
        this.report(String(err), true);
      }
    });
    root.appendChild(file);
    root.appendChild(this.status);
  }

  private scaleSelection(factor: number): void {
    if (!this.selection) return this.report("select a segment first (shift-drag)", true);
    const { t0, t1 } = this.selection;
    this.apply((s) => timeScale(s, t0, t1, factor), `scaled x${factor}`);
  }

  // -- coordinate mapping -----------------------------------------------------

  private timeSpan(): number {
    const seq = this.seq();
    return Math.max(1, seq ? duration(seq) * 1.05 : 1);
  }

  private xOf(t: number): number {
    return PAD_L + (t / this.timeSpan()) * (this.canvas.width - PAD_L - 10);
  }

  private tOf(x: number): number {
    return Math.max(0, ((x - PAD_L) / (this.canvas.width - PAD_L - 10)) * this.timeSpan());
  }

  private laneRange(channel: Channel): [number, number] {
    const limits = this.limitsFor(channel.target);
    if (limits) return [limits.low, limits.high];
    const values = channel.keys.map((k) => k.value);
    return [Math.min(0, ...values) - 0.5, Math.max(0, ...values) + 0.5];
  }

  private yOf(lane: number, channel: Channel, v: number): number {
    const [lo, hi] = this.laneRange(channel);
    const top = lane * LANE_H + 18;
    return top + (1 - (v - lo) / (hi - lo)) * (LANE_H - 30);
  }

  private vOf(lane: number, channel: Channel, y: number): number {
    const [lo, hi] = this.laneRange(channel);
    const top = lane * LANE_H + 18;
    const frac = 1 - (y - top) / (LANE_H - 30);
    return lo + Math.max(0, Math.min(1, frac)) * (hi - lo);
  }

  // -- pointer handling ---------------------------------------------------------

  private hit(x: number, y: number): DragState | null {
    const seq = this.seq();
    if (!seq) return null;
    for (let c = 0; c < seq.channels.length; c++) {
      const channel = seq.channels[c];
      for (let k = 0; k < channel.keys.length; k++) {
        const key = channel.keys[k];
        const kx = this.xOf(key.t);
        const ky = this.yOf(c, channel, key.value);
        if (Math.hypot(x - kx, y - ky) < 7) return { channel: c, key: k, part: "key" };
        if (key.interp === "bezier" || channel.keys[k - 1]?.interp === "bezier") {
          for (const part of ["h_in", "h_out"] as const) {
            const h = part === "h_in" ? key.handleIn : key.handleOut;
            if (!h) continue;
            const hx = this.xOf(part === "h_in" ? key.t - h[0] : key.t + h[0]);
            const hy = this.yOf(c, channel, part === "h_in" ? key.value - h[1] : key.value + h[1]);
            if (Math.hypot(x - hx, y - hy) < 6) return { channel: c, key: k, part };
          }
        }
      }
    }
    return null;
  }

  private onDown(e: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const x = e.clientX - rect.left;
    const y = e.clientY - rect.top;
    if (e.shiftKey) {
      this.selecting = true;
      this.selection = { t0: this.tOf(x), t1: this.tOf(x) };
      return;
    }
    this.drag = this.hit(x, y);
    if (this.drag) this.canvas.setPointerCapture(e.pointerId);
  }

  private onMove(e: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const x = e.clientX - rect.left;
    const y = e.clientY - rect.top;
    if (this.selecting && this.selection) {
      this.selection.t1 = this.tOf(x);
      return;
    }
    if (!this.drag) return;
    const seq = this.seq();
    if (!seq) return;
    const channel = seq.channels[this.drag.channel];
    const key = channel.keys[this.drag.key];
    try {
      if (this.drag.part === "key") this.dragKey(seq, channel, key, x, y);
      else this.dragHandle(seq, channel, key, this.drag.part, x, y);
    } catch (err) {
      this.report(err instanceof TimelineError ? err.message : String(err), true);
    }
  }

  private dragKey(seq: Sequence, channel: Channel, key: Keyframe, x: number, y: number): void {
    const idx = channel.keys.indexOf(key);
    let t = this.tOf(x);
    // clamp at neighbours minus a small epsilon so the order never flips
    const prev = channel.keys[idx - 1];
    const next = channel.keys[idx + 1];
    if (prev) t = Math.max(prev.t + EPS, t);
    if (next) t = Math.min(next.t - EPS, t);
    const lane = seq.channels.indexOf(channel);
    const value = this.vOf(lane, channel, y);
    let edited = deleteKeyframe(seq, channel.target, key.t);
    edited = insertKeyframe(
      edited,
      channel.target,
      { ...key, t, value },
      this.limitsFor(channel.target),
    );
    this.session.setSequence(edited);
    this.drag = { channel: lane, key: edited.channels[lane].keys.findIndex((k) => k.t === t), part: "key" };
    this.report(`key @ ${t.toFixed(3)} s = ${value.toFixed(3)}`);
  }

  private dragHandle(
    seq: Sequence,
    channel: Channel,
    key: Keyframe,
    part: "h_in" | "h_out",
    x: number,
    y: number,
  ): void {
    const idx = channel.keys.indexOf(key);
    const lane = seq.channels.indexOf(channel);
    const t = this.tOf(x);
    const v = this.vOf(lane, channel, y);
    let dt = part === "h_in" ? key.t - t : t - key.t;
    const dv = part === "h_in" ? key.value - v : v - key.value;
    // x-monotonicity: handles stay on their side and inside the segment span
    dt = Math.max(0, dt);
    const neighbour = part === "h_in" ? channel.keys[idx - 1] : channel.keys[idx + 1];
    if (neighbour) dt = Math.min(dt, Math.abs(key.t - neighbour.t));
    const updated: Keyframe = { ...key };
    if (part === "h_in") updated.handleIn = [dt, dv];
    else updated.handleOut = [dt, dv];
    let edited = deleteKeyframe(seq, channel.target, key.t);
    edited = insertKeyframe(edited, channel.target, updated, this.limitsFor(channel.target));
    this.session.setSequence(edited);
    this.drag = { channel: lane, key: idx, part };
  }

  private onUp(): void {
    this.drag = null;
    if (this.selecting && this.selection) {
      if (this.selection.t1 < this.selection.t0) {
        const { t0, t1 } = this.selection;
        this.selection = { t0: t1, t1: t0 };
      }
      if (this.selection.t1 - this.selection.t0 < 1e-3) this.selection = null;
      this.selecting = false;
      if (this.selection) {
        this.report(
          `selected [${this.selection.t0.toFixed(2)}, ${this.selection.t1.toFixed(2)}] s`,
        );
      }
    }
  }

  private onDouble(e: PointerEvent | MouseEvent): void {
    const seq = this.seq();
    if (!seq) return;
    const rect = this.canvas.getBoundingClientRect();
    const x = e.clientX - rect.left;
    const y = e.clientY - rect.top;
    const lane = Math.floor(y / LANE_H);
    const channel = seq.channels[lane];
    if (!channel) return;
    const t = this.tOf(x);
    const value = this.vOf(lane, channel, y);
    this.apply(
      (s) => insertKeyframe(s, channel.target, { t, value, interp: "bezier" }, this.limitsFor(channel.target)),
      `inserted key @ ${t.toFixed(3)} s`,
    );
  }

  // -- drawing ------------------------------------------------------------------

  render(): void {
    const { ctx, canvas } = this;
    const seq = this.seq();
    ctx.fillStyle = "#0d1016";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (!seq) {
      ctx.fillStyle = "#5b6b80";
      ctx.font = "13px sans-serif";
      ctx.fillText("load or upload a sequence to edit its curves", 20, 30);
      return;
    }
    canvas.height = Math.max(1, seq.channels.length) * LANE_H + 10;

    if (this.selection) {
      ctx.fillStyle = "rgba(110, 160, 255, 0.12)";
      const x0 = this.xOf(this.selection.t0);
      const x1 = this.xOf(this.selection.t1);
      ctx.fillRect(x0, 0, x1 - x0, canvas.height);
    }

    const playhead = this.session.state.snapshot;
    seq.channels.forEach((channel, lane) => {
      const top = lane * LANE_H;
      ctx.strokeStyle = "#1c2533";
      ctx.strokeRect(PAD_L, top + 8, canvas.width - PAD_L - 10, LANE_H - 14);
      ctx.fillStyle = "#8fa3bb";
      ctx.font = "11px monospace";
      ctx.fillText(
        channel.target === "gripper" ? "gripper" : `joint ${channel.target}`,
        6,
        top + LANE_H / 2,
      );

      // evaluate-preview overlay
      ctx.strokeStyle = "#68c4a5";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      const steps = 160;
      for (let i = 0; i <= steps; i++) {
        const t = (i / steps) * this.timeSpan();
        const px = this.xOf(t);
        const py = this.yOf(lane, channel, channelValue(channel, t));
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      }
      ctx.stroke();

      for (const key of channel.keys) {
        const kx = this.xOf(key.t);
        const ky = this.yOf(lane, channel, key.value);
        for (const part of ["h_in", "h_out"] as const) {
          const h = part === "h_in" ? key.handleIn : key.handleOut;
          if (!h || key.interp !== "bezier") continue;
          const hx = this.xOf(part === "h_in" ? key.t - h[0] : key.t + h[0]);
          const hy = this.yOf(lane, channel, part === "h_in" ? key.value - h[1] : key.value + h[1]);
          ctx.strokeStyle = "#44597a";
          ctx.lineWidth = 1;
          ctx.beginPath();
          ctx.moveTo(kx, ky);
          ctx.lineTo(hx, hy);
          ctx.stroke();
          ctx.fillStyle = "#6e87ad";
          ctx.fillRect(hx - 3, hy - 3, 6, 6);
        }
        ctx.beginPath();
        ctx.arc(kx, ky, 4.5, 0, Math.PI * 2);
        ctx.fillStyle = "#ffd166";
        ctx.fill();
      }
    });

    if (playhead && playhead.mode === "playing") {
      // server playback time is not broadcast per channel; show sim t modulo span
      const x = this.xOf(Math.min(this.timeSpan(), playhead.t % this.timeSpan()));
      ctx.strokeStyle = "#ffffff66";
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, canvas.height);
      ctx.stroke();
    }
  }
}
