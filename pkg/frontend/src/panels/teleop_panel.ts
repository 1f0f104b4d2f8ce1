// Teleop panel: pilot acquisition, keyboard/gamepad capture, and live
// indicators mirroring the controller state carried in snapshots.
import { GamepadTeleop, KeyboardTeleop } from "../bindings.js";
import type { StudioSession } from "../socket.js";

export class TeleopPanel {
  private keyboard = new KeyboardTeleop();
  private gamepad = new GamepadTeleop();

  private pilotButton: HTMLButtonElement;
  private modeButton: HTMLButtonElement;
  private indicators: HTMLElement;
  private prompt: HTMLElement;

  constructor(private root: HTMLElement, private session: StudioSession) {
    this.pilotButton = document.createElement("button");
    this.pilotButton.textContent = "acquire pilot";
    this.pilotButton.addEventListener("click", () => this.togglePilot());

    this.modeButton = document.createElement("button");
    this.modeButton.textContent = "enter teleop";
    this.modeButton.addEventListener("click", () => this.toggleTeleop());

    const clearButton = document.createElement("button");
    clearButton.textContent = "clear fault";
    clearButton.addEventListener("click", () => this.session.send("fault_clear", {}));

    const presetButton = document.createElement("button");
    presetButton.textContent = "go home";
    presetButton.addEventListener("click", () => this.session.send("preset_goto", { name: "home" }));

    this.prompt = document.createElement("div");
    this.prompt.className = "prompt";
    this.prompt.textContent = "acquire the pilot role to drive the arm";

    this.indicators = document.createElement("div");
    this.indicators.className = "indicators";

    const help = document.createElement("div");
    help.className = "help";
    help.textContent =
      "WASD/arrows/PgUp/PgDn: sticks · M: mode · Q/E: speed · J: next joint · " +
      "I: inertia · C: clear fault · H: home · G/B: gripper (or plug in a gamepad)";

    root.append(this.pilotButton, this.modeButton, clearButton, presetButton, this.prompt, this.indicators, help);

    window.addEventListener("keydown", (e) => {
      if (e.repeat || this.ignoreKeys(e)) return;
      this.emit(this.keyboard.keyDown(e.code));
    });
    window.addEventListener("keyup", (e) => {
      if (this.ignoreKeys(e)) return;
      this.emit(this.keyboard.keyUp(e.code));
    });
    window.addEventListener("blur", () => this.emit(this.keyboard.releaseAll()));
  }

  private ignoreKeys(e: KeyboardEvent): boolean {
    const el = e.target as HTMLElement | null;
    return !!el && (el.tagName === "INPUT" || el.tagName === "TEXTAREA");
  }

  private emit(events: { kind: "axis" | "press" | "release"; id: string; value?: number }[]): void {
    if (!this.session.state.pilot) return;
    for (const ev of events) this.session.sendInput(ev);
  }

  private togglePilot(): void {
    if (this.session.state.pilot) void this.session.releasePilot();
    else void this.session.acquirePilot();
  }

  private toggleTeleop(): void {
    const snap = this.session.state.snapshot;
    const mode = snap?.mode === "teleop" ? "idle" : "teleop";
    void this.session.request("mode_set", { mode });
  }

  pollGamepad(): void {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0];
    if (!pad) return;
    this.emit(
      this.gamepad.poll({
        axes: pad.axes,
        buttons: pad.buttons.map((b) => b.pressed),
      }),
    );
  }

  render(): void {
    const state = this.session.state;
    const snap = state.snapshot;
    this.pilotButton.textContent = state.pilot ? "release pilot" : "acquire pilot";
    this.prompt.style.display = state.pilot ? "none" : "block";
    this.modeButton.disabled = !state.pilot;
    this.modeButton.textContent = snap?.mode === "teleop" ? "leave teleop" : "enter teleop";
    if (!snap) {
      this.indicators.textContent = "";
      return;
    }
    const tele = snap.teleop;
    this.indicators.innerHTML = "";
    const chip = (label: string, on = false) => {
      const span = document.createElement("span");
      span.className = on ? "chip on" : "chip";
      span.textContent = label;
      this.indicators.appendChild(span);
    };
    chip(`mode: ${tele.control_mode}`, tele.control_mode === "cartesian");
    chip(`joint ${tele.selected_joint}`);
    chip(`joint speed ${(tele.joint_speed_scale * 100).toFixed(0)}%`);
    chip(`cart speed ${(tele.cart_speed_scale * 100).toFixed(0)}%`);
    chip("inertia", tele.inertia_enabled);
    chip(`grip ${(tele.gripper_cmd * 100).toFixed(0)}%`);
    if (snap.fault) chip(`fault: ${snap.fault}`, true);
  }
}
