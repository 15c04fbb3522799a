/**
 * Control-to-command mapping: every widget produces exactly one command
 * type. Slider values are native widget units (veh/h for flows, percent
 * for the equipped ratio).
 */

import { Approach, Command, RequestId, SpeedModeName, end, setFlow,
         setRatio, setSpeed } from "./protocol.js";

export function flowSliderCommand(approach: Approach, vehPerHour: number,
                                  requestId: RequestId): Command {
  return setFlow(approach, Math.round(vehPerHour), requestId);
}

export function ratioSliderCommand(percent: number,
                                   requestId: RequestId): Command {
  return setRatio(percent / 100, requestId);
}

export function speedRadioCommand(mode: SpeedModeName,
                                  requestId: RequestId): Command {
  return setSpeed(mode, requestId);
}

export function endButtonCommand(requestId: RequestId): Command {
  return end(requestId);
}
