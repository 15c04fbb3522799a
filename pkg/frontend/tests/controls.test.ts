import { describe, expect, it } from "vitest";

import { endButtonCommand, flowSliderCommand, ratioSliderCommand,
         speedRadioCommand } from "../src/controls.js";

describe("every control maps to exactly one command", () => {
  it("flow slider W at 1800 emits set_flow{W,1800}", () => {
    expect(flowSliderCommand("W", 1800, "r1")).toEqual({
      type: "set_flow", approach: "W", veh_per_hour: 1800, request_id: "r1",
    });
  });

  it("ratio slider at 70 emits set_ratio{0.7}", () => {
    expect(ratioSliderCommand(70, "r2")).toEqual({
      type: "set_ratio", ratio: 0.7, request_id: "r2",
    });
  });

  it("speed radio fast emits set_speed{fast}", () => {
    expect(speedRadioCommand("fast", "r3")).toEqual({
      type: "set_speed", mode: "fast", request_id: "r3",
    });
  });

  it("END button emits end{}", () => {
    expect(endButtonCommand("r4")).toEqual({ type: "end", request_id: "r4" });
  });
});
