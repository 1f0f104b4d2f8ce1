import { describe, expect, it } from "vitest";

import { GamepadTeleop, KeyboardTeleop } from "../src/bindings.js";
import { inputEventSchema } from "../src/protocol.js";

describe("keyboard teleop", () => {
  it("emits one press per physical press, release on key up", () => {
    const kb = new KeyboardTeleop();
    expect(kb.keyDown("KeyM")).toEqual([{ kind: "press", id: "button.options" }]);
    expect(kb.keyDown("KeyM")).toEqual([]); // auto-repeat suppressed
    expect(kb.keyUp("KeyM")).toEqual([{ kind: "release", id: "button.options" }]);
  });

  it("folds key pairs into axis values and zeroes on release", () => {
    const kb = new KeyboardTeleop();
    expect(kb.keyDown("KeyW")).toEqual([{ kind: "axis", id: "axis.left_y", value: 1 }]);
    expect(kb.keyDown("KeyS")).toEqual([{ kind: "axis", id: "axis.left_y", value: 0 }]);
    expect(kb.keyUp("KeyW")).toEqual([{ kind: "axis", id: "axis.left_y", value: -1 }]);
    // releasing the last key always re-zeros the axis: no stuck velocity
    expect(kb.keyUp("KeyS")).toEqual([{ kind: "axis", id: "axis.left_y", value: 0 }]);
  });

  it("releaseAll zeroes every engaged axis", () => {
    const kb = new KeyboardTeleop();
    kb.keyDown("KeyW");
    kb.keyDown("ArrowLeft");
    const events = kb.releaseAll();
    expect(events).toContainEqual({ kind: "axis", id: "axis.left_y", value: 0 });
    expect(events).toContainEqual({ kind: "axis", id: "axis.right_x", value: 0 });
  });

  it("ignores unbound keys", () => {
    const kb = new KeyboardTeleop();
    expect(kb.keyDown("KeyZ")).toEqual([]);
    expect(kb.keyUp("KeyZ")).toEqual([]);
  });

  it("every emitted event is a valid wire input payload", () => {
    const kb = new KeyboardTeleop();
    const events = [
      ...kb.keyDown("KeyW"),
      ...kb.keyDown("KeyJ"),
      ...kb.keyUp("KeyW"),
      ...kb.keyUp("KeyJ"),
      ...kb.releaseAll(),
    ];
    expect(events.length).toBeGreaterThan(0);
    for (const e of events) inputEventSchema.parse(e);
  });
});

describe("gamepad teleop", () => {
  it("diffs axis changes with deadzone and up-positive convention", () => {
    const pad = new GamepadTeleop();
    const first = pad.poll({ axes: [0.5, -0.8, 0.01, 0], buttons: [] });
    expect(first).toContainEqual({ kind: "axis", id: "axis.left_x", value: 0.5 });
    expect(first).toContainEqual({ kind: "axis", id: "axis.left_y", value: 0.8 });
    expect(first.find((e) => e.id === "axis.right_x")).toBeUndefined(); // deadzone
    // unchanged poll emits nothing
    expect(pad.poll({ axes: [0.5, -0.8, 0.01, 0], buttons: [] })).toEqual([]);
  });

  it("releasing the stick emits a zero-axis event", () => {
    const pad = new GamepadTeleop();
    pad.poll({ axes: [0.9, 0, 0, 0], buttons: [] });
    const events = pad.poll({ axes: [0.0, 0, 0, 0], buttons: [] });
    expect(events).toEqual([{ kind: "axis", id: "axis.left_x", value: 0 }]);
  });

  it("maps button edges to press/release", () => {
    const pad = new GamepadTeleop();
    const down = pad.poll({ axes: [0, 0, 0, 0], buttons: [true] });
    expect(down).toEqual([{ kind: "press", id: "button.cross" }]);
    const up = pad.poll({ axes: [0, 0, 0, 0], buttons: [false] });
    expect(up).toEqual([{ kind: "release", id: "button.cross" }]);
  });
});
