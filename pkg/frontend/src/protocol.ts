/**
 * Wire types and command builders for the live steering protocol.
 *
 * Everything on the wire is a JSON text frame. The server pushes
 * snapshots; the client sends commands carrying a request_id and gets
 * back an ack or an error naming the problem.
 */

export type LaneId = string;

export const APPROACHES = ["W", "S", "E", "N"] as const;
export type Approach = (typeof APPROACHES)[number];

export const LANE_IDS: LaneId[] = ["WL", "WC", "WR", "SL", "SC", "SR",
                                   "EL", "EC", "ER", "NL", "NC", "NR"];

export type SignalColor = "red" | "yellow" | "green";
export type SpeedModeName = "fast" | "medium" | "slow" | "very-slow" | "headless";

export interface VehicleState {
  id: number;
  lane: LaneId;
  head_pos: number;
  velocity: number;
  equipped: boolean;
  regime: string;
}

export interface SignalState {
  lane: LaneId;
  color: SignalColor;
  time_in_cycle: number;
}

export interface SnapshotStats {
  vehicles_in_system: number;
  total_spawned: number;
  total_departed: number;
  pending_count: number;
  avg_delay_s: number;
  total_stops: number;
  avg_stops_per_vehicle: number;
  total_stop_time_s: number;
  avg_stop_time_s: number;
  throughput_veh_per_h: number;
  equipped_fraction_actual: number;
  sim_time_s: number;
}

export interface PlanSegment {
  color: SignalColor;
  start_s: number;
  end_s: number;
}

export interface PlanDoc {
  cycle_s: number;
  lanes: Record<LaneId, PlanSegment[]>;
}

export interface SnapshotConfig {
  flows: Record<Approach, number>;
  equipped_ratio: number;
  approach_length: number;
  exit_length: number;
  cycle_s: number;
  plan: PlanDoc;
}

export interface Snapshot {
  v: number;
  type: "snapshot";
  sim_time: number;
  mode: SpeedModeName;
  status: "running" | "ended" | "aborted";
  vehicles: VehicleState[];
  signals: SignalState[];
  stats: SnapshotStats;
  config: SnapshotConfig;
}

export interface Ack {
  type: "ack";
  request_id: RequestId;
}

export interface ErrorReply {
  type: "error";
  request_id: RequestId | null;
  message: string;
}

export type ServerFrame = Snapshot | Ack | ErrorReply;
export type RequestId = string | number;

export interface SetFlowCommand {
  type: "set_flow";
  approach: Approach;
  veh_per_hour: number;
  request_id: RequestId;
}

export interface SetRatioCommand {
  type: "set_ratio";
  ratio: number;
  request_id: RequestId;
}

export interface SetSpeedCommand {
  type: "set_speed";
  mode: SpeedModeName;
  request_id: RequestId;
}

export interface SetPlanCommand {
  type: "set_plan";
  plan: PlanDoc;
  request_id: RequestId;
}

export interface EndCommand {
  type: "end";
  request_id: RequestId;
}

export type Command = SetFlowCommand | SetRatioCommand | SetSpeedCommand
                    | SetPlanCommand | EndCommand;

export function setFlow(approach: Approach, vehPerHour: number,
                        requestId: RequestId): SetFlowCommand {
  return { type: "set_flow", approach, veh_per_hour: vehPerHour,
           request_id: requestId };
}

export function setRatio(ratio: number, requestId: RequestId): SetRatioCommand {
  return { type: "set_ratio", ratio, request_id: requestId };
}

export function setSpeed(mode: SpeedModeName, requestId: RequestId): SetSpeedCommand {
  return { type: "set_speed", mode, request_id: requestId };
}

export function setPlan(plan: PlanDoc, requestId: RequestId): SetPlanCommand {
  return { type: "set_plan", plan, request_id: requestId };
}

export function end(requestId: RequestId): EndCommand {
  return { type: "end", request_id: requestId };
}

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}

/** Parse a server frame; throws on anything that is not one of the three
 * frame types (the UI treats that as a protocol error). */
export function parseServerFrame(text: string): ServerFrame {
  const data = JSON.parse(text);
  if (data === null || typeof data !== "object") {
    throw new Error("frame is not an object");
  }
  switch (data.type) {
    case "snapshot":
    case "ack":
    case "error":
      return data as ServerFrame;
    default:
      throw new Error(`unknown frame type: ${String(data.type)}`);
  }
}
