// Keyboard and gamepad capture. The UI emits raw device ids; the server owns
// the id -> action binding map (announced in hello), so the keyboard layer
// here simply synthesizes the same device ids a physical pad would produce,
// with key pairs acting as virtual axes.
import type { InputEventJson } from "./protocol.js";

export interface KeyAxisBinding {
  kind: "axis";
  id: string; // device axis id, e.g. "axis.left_y"
  value: number; // contribution while held (-1..1)
}

export interface KeyButtonBinding {
  kind: "button";
  id: string; // device button id, e.g. "button.options"
}

export type KeyBinding = KeyAxisBinding | KeyButtonBinding;

// KeyboardEvent.code -> synthetic device id. Axis keys come in +/- pairs.
export const DEFAULT_KEYBOARD_MAP: Record<string, KeyBinding> = {
  KeyW: { kind: "axis", id: "axis.left_y", value: 1 },
  KeyS: { kind: "axis", id: "axis.left_y", value: -1 },
  KeyA: { kind: "axis", id: "axis.left_x", value: -1 },
  KeyD: { kind: "axis", id: "axis.left_x", value: 1 },
  ArrowUp: { kind: "axis", id: "axis.right_y", value: 1 },
  ArrowDown: { kind: "axis", id: "axis.right_y", value: -1 },
  ArrowLeft: { kind: "axis", id: "axis.right_x", value: -1 },
  ArrowRight: { kind: "axis", id: "axis.right_x", value: 1 },
  PageUp: { kind: "axis", id: "axis.dpad_y", value: 1 },
  PageDown: { kind: "axis", id: "axis.dpad_y", value: -1 },
  KeyM: { kind: "button", id: "button.options" },
  KeyE: { kind: "button", id: "button.r1" },
  KeyQ: { kind: "button", id: "button.l1" },
  KeyJ: { kind: "button", id: "button.cross" },
  KeyI: { kind: "button", id: "button.square" },
  KeyC: { kind: "button", id: "button.circle" },
  KeyH: { kind: "button", id: "button.triangle" },
  KeyG: { kind: "button", id: "button.r3" },
  KeyB: { kind: "button", id: "button.l3" },
};

/**
 * Tracks held keys and folds +/- key pairs into axis values, emitting the
 * input events to put on the wire. Press events fire once per physical press
 * (auto-repeat is suppressed); releasing every key of an axis always emits a
 * zero-value event so no velocity can stick.
 */
export class KeyboardTeleop {
  private held = new Set<string>();
  private axisValues = new Map<string, number>();

  constructor(private map: Record<string, KeyBinding> = DEFAULT_KEYBOARD_MAP) {}

  keyDown(code: string): InputEventJson[] {
    const binding = this.map[code];
    if (!binding || this.held.has(code)) return [];
    this.held.add(code);
    if (binding.kind === "button") return [{ kind: "press", id: binding.id }];
    return this.recomputeAxis(binding.id);
  }

  keyUp(code: string): InputEventJson[] {
    const binding = this.map[code];
    if (!binding || !this.held.has(code)) return [];
    this.held.delete(code);
    if (binding.kind === "button") return [{ kind: "release", id: binding.id }];
    return this.recomputeAxis(binding.id);
  }

  /** Zero every axis and drop held state (used on blur/disconnect). */
  releaseAll(): InputEventJson[] {
    this.held.clear();
    const events: InputEventJson[] = [];
    for (const [id, value] of this.axisValues) {
      if (value !== 0) events.push({ kind: "axis", id, value: 0 });
      this.axisValues.set(id, 0);
    }
    return events;
  }

  private recomputeAxis(id: string): InputEventJson[] {
    let value = 0;
    for (const code of this.held) {
      const b = this.map[code];
      if (b && b.kind === "axis" && b.id === id) value += b.value;
    }
    value = Math.max(-1, Math.min(1, value));
    if (this.axisValues.get(id) === value) return [];
    this.axisValues.set(id, value);
    return [{ kind: "axis", id, value }];
  }
}

const GAMEPAD_AXIS_IDS = ["axis.left_x", "axis.left_y", "axis.right_x", "axis.right_y"];
const GAMEPAD_BUTTON_IDS: Record<number, string> = {
  0: "button.cross",
  1: "button.circle",
  2: "button.square",
  3: "button.triangle",
  4: "button.l1",
  5: "button.r1",
  9: "button.options",
  10: "button.l3",
  11: "button.r3",
};

export interface PadSample {
  axes: readonly number[];
  buttons: readonly boolean[];
}

/** Diffs successive gamepad polls into wire input events. */
export class GamepadTeleop {
  private prevAxes: number[] = [0, 0, 0, 0];
  private prevButtons: boolean[] = [];

  poll(sample: PadSample, deadzone = 0.05): InputEventJson[] {
    const events: InputEventJson[] = [];
    GAMEPAD_AXIS_IDS.forEach((id, i) => {
      let value = sample.axes[i] ?? 0;
      if (Math.abs(value) < deadzone) value = 0;
      // browser pads report stick-down as positive; the wire uses up-positive
      if (id.endsWith("_y")) value = -value;
      value = Math.max(-1, Math.min(1, value));
      if (value !== this.prevAxes[i]) {
        events.push({ kind: "axis", id, value });
        this.prevAxes[i] = value;
      }
    });
    sample.buttons.forEach((pressed, i) => {
      const id = GAMEPAD_BUTTON_IDS[i];
      if (!id) return;
      const was = this.prevButtons[i] ?? false;
      if (pressed && !was) events.push({ kind: "press", id });
      if (!pressed && was) events.push({ kind: "release", id });
      this.prevButtons[i] = pressed;
    });
    return events;
  }
}
