// Studio entry point: wires the session to the four panels and runs the
// render loop (snapshot updates are coalesced to display rate by drawing from
// the latest state each frame).
import { ArmView } from "./panels/arm_view.js";
import { MoaPanel } from "./panels/moa_panel.js";
import { TeleopPanel } from "./panels/teleop_panel.js";
import { TimelinePanel } from "./panels/timeline_panel.js";
import { StudioSession } from "./socket.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const session = new StudioSession();

const armView = new ArmView(
  el<HTMLCanvasElement>("arm-canvas"),
  session,
  el("staleness-badge"),
  el("fault-banner"),
);
const timeline = new TimelinePanel(el<HTMLCanvasElement>("timeline-canvas"), session, el("timeline-controls"));
const teleop = new TeleopPanel(el("teleop-panel"), session);
const moa = new MoaPanel(el("moa-panel"), session);

const urlInput = el<HTMLInputElement>("server-url");
urlInput.value = `ws://${location.hostname || "127.0.0.1"}:8765/ws`;
el<HTMLButtonElement>("connect-button").addEventListener("click", () => {
  session.connect(urlInput.value);
});

const statusLine = el("status-line");
session.onChange((state) => {
  const bits: string[] = [state.status];
  if (state.hello) bits.push(`model ${state.hello.model.name}`);
  if (state.pilot) bits.push("pilot");
  if (state.lastLogId) bits.push(`log ${state.lastLogId}`);
  if (state.lastError) bits.push(`last error: ${state.lastError}`);
  statusLine.textContent = bits.join(" · ");
});

function frame(now: number): void {
  teleop.pollGamepad();
  armView.render(now);
  timeline.render();
  teleop.render();
  moa.render();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
