/**
 * World-to-screen mapping and the canvas scene.
 *
 * World frame: meters, origin at the intersection center, x east, y
 * north. Each approach runs toward the center along its travel axis with
 * its three lanes on the right-hand side of travel: left-turn lane
 * innermost, right-turn lane at the curb. head_pos counts from the spawn
 * point (0) to the stop line (approach_length) and keeps growing through
 * the exit segment, so departed vehicles continue across the box.
 *
 * The view shows the last `windowM` meters of every approach plus the
 * box and exit segments; upstream traffic beyond the window is off
 * screen by design (the action is at the stop line).
 */

import { LaneId, Snapshot, SnapshotStats, VehicleState } from "./protocol.js";

export const ROAD_HALF_WIDTH = 11.25;   // 22.5 m of paved road per axis
export const LANE_WIDTH = 3.5;
export const MEDIAN_HALF = 0.75;
export const VEHICLE_LENGTH = 4.5;
export const VEHICLE_WIDTH = 2.5;

export const EQUIPPED_COLOR = "#3b82f6";     // blue: carries the onboard unit
export const UNEQUIPPED_COLOR = "#ef4444";   // red: unequipped
const ROAD_COLOR = "#2b2f33";
const MARKING_COLOR = "#5b6168";
const SIGNAL_COLORS: Record<string, string> = {
  red: "#e74c3c", yellow: "#f1c40f", green: "#2ecc71",
};

export interface Viewport {
  width: number;
  height: number;
  windowM: number;          // meters of approach shown before the stop line
  approachLength: number;
}

/** Lateral offset of a lane's centerline from the road axis, meters. */
export function laneOffset(movement: string): number {
  switch (movement) {
    case "L": return MEDIAN_HALF + LANE_WIDTH / 2;
    case "C": return MEDIAN_HALF + LANE_WIDTH * 1.5;
    case "R": return MEDIAN_HALF + LANE_WIDTH * 2.5;
    default: throw new Error(`unknown movement: ${movement}`);
  }
}

export interface LaneFrame {
  dir: [number, number];        // unit vector of travel
  stopPoint: [number, number];  // lane centerline at the stop line
}

export function laneFrame(lane: LaneId): LaneFrame {
  const off = laneOffset(lane[1]);
  switch (lane[0]) {
    case "W": return { dir: [1, 0], stopPoint: [-ROAD_HALF_WIDTH, -off] };
    case "E": return { dir: [-1, 0], stopPoint: [ROAD_HALF_WIDTH, off] };
    case "S": return { dir: [0, 1], stopPoint: [off, -ROAD_HALF_WIDTH] };
    case "N": return { dir: [0, -1], stopPoint: [-off, ROAD_HALF_WIDTH] };
    default: throw new Error(`unknown approach: ${lane[0]}`);
  }
}

/** World position of a head_pos along a lane. */
export function worldPoint(lane: LaneId, headPos: number,
                           approachLength: number): [number, number] {
  const { dir, stopPoint } = laneFrame(lane);
  const along = headPos - approachLength;   // 0 at the stop line
  return [stopPoint[0] + dir[0] * along, stopPoint[1] + dir[1] * along];
}

export function viewScale(view: Viewport): number {
  const extent = ROAD_HALF_WIDTH + view.windowM;
  return (Math.min(view.width, view.height) / 2 - 8) / extent;
}

export function worldToScreen(pt: [number, number],
                              view: Viewport): [number, number] {
  const s = viewScale(view);
  return [view.width / 2 + pt[0] * s, view.height / 2 - pt[1] * s];
}

export function vehicleColor(equipped: boolean): string {
  return equipped ? EQUIPPED_COLOR : UNEQUIPPED_COLOR;
}

/** The subset of CanvasRenderingContext2D the scene uses; tests pass a
 * recording stub. */
export interface SceneContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

/** Axis-aligned screen rectangle of a vehicle on its lane. */
export function vehicleRect(v: VehicleState, view: Viewport):
    { x: number; y: number; w: number; h: number } | null {
  const front = worldPoint(v.lane, v.head_pos, view.approachLength);
  const rear = worldPoint(v.lane, v.head_pos - VEHICLE_LENGTH, view.approachLength);
  const extent = ROAD_HALF_WIDTH + view.windowM;
  if (Math.max(Math.abs(front[0]), Math.abs(front[1])) > extent + VEHICLE_LENGTH) {
    return null;   // upstream of the view window
  }
  const [fx, fy] = worldToScreen(front, view);
  const [rx, ry] = worldToScreen(rear, view);
  const s = viewScale(view);
  const half = (VEHICLE_WIDTH / 2) * s;
  if (fx === rx) {
    return { x: fx - half, y: Math.min(fy, ry), w: half * 2, h: Math.abs(ry - fy) };
  }
  return { x: Math.min(fx, rx), y: fy - half, w: Math.abs(rx - fx), h: half * 2 };
}

function drawRoads(ctx: SceneContext, view: Viewport): void {
  const s = viewScale(view);
  const cx = view.width / 2;
  const cy = view.height / 2;
  const half = ROAD_HALF_WIDTH * s;
  ctx.fillStyle = ROAD_COLOR;
  ctx.fillRect(0, cy - half, view.width, half * 2);
  ctx.fillRect(cx - half, 0, half * 2, view.height);
  ctx.strokeStyle = MARKING_COLOR;
  ctx.lineWidth = 1;
  for (const axis of ["h", "v"]) {
    for (let k = -3; k <= 3; k++) {
      const off = (k === 0 ? 0 : Math.sign(k) * (MEDIAN_HALF + (Math.abs(k) - 1) * LANE_WIDTH)) * s;
      if (k === 0) continue;
      ctx.beginPath();
      if (axis === "h") {
        ctx.moveTo(0, cy + off);
        ctx.lineTo(cx - half, cy + off);
        ctx.moveTo(cx + half, cy + off);
        ctx.lineTo(view.width, cy + off);
      } else {
        ctx.moveTo(cx + off, 0);
        ctx.lineTo(cx + off, cy - half);
        ctx.moveTo(cx + off, cy + half);
        ctx.lineTo(cx + off, view.height);
      }
      ctx.stroke();
    }
  }
  ctx.strokeStyle = "#777";
  ctx.strokeRect(cx - half, cy - half, half * 2, half * 2);
}

function drawSignals(ctx: SceneContext, snapshot: Snapshot, view: Viewport): void {
  const s = viewScale(view);
  const size = Math.max(3, LANE_WIDTH * 0.6 * s);
  for (const sig of snapshot.signals) {
    const pt = worldPoint(sig.lane, view.approachLength, view.approachLength);
    const { dir } = laneFrame(sig.lane);
    // nudge the head into the box so it does not cover the stop line
    const px = pt[0] + dir[0] * 2.0;
    const py = pt[1] + dir[1] * 2.0;
    const [x, y] = worldToScreen([px, py], view);
    ctx.fillStyle = SIGNAL_COLORS[sig.color] ?? "#888";
    ctx.fillRect(x - size / 2, y - size / 2, size, size);
  }
}

export function renderScene(ctx: SceneContext, snapshot: Snapshot,
                            view: Viewport): void {
  ctx.clearRect(0, 0, view.width, view.height);
  drawRoads(ctx, view);
  drawSignals(ctx, snapshot, view);
  for (const v of snapshot.vehicles) {
    const rect = vehicleRect(v, view);
    if (!rect) continue;
    ctx.fillStyle = vehicleColor(v.equipped);
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
  }
  ctx.fillStyle = "#ddd";
  ctx.font = "12px monospace";
  ctx.fillText(`t = ${snapshot.sim_time.toFixed(1)} s  (${snapshot.mode})`, 8, 16);
}

export interface StatsRow {
  key: keyof SnapshotStats;
  label: string;
  value: number;
  text: string;
}

const STATS_LAYOUT: [keyof SnapshotStats, string][] = [
  ["vehicles_in_system", "Vehicles in system"],
  ["total_spawned", "Total spawned"],
  ["total_departed", "Total departed"],
  ["pending_count", "Pending"],
  ["avg_delay_s", "Avg delay (s)"],
  ["total_stops", "Total stops"],
  ["avg_stops_per_vehicle", "Avg stops / vehicle"],
  ["total_stop_time_s", "Total stop time (s)"],
  ["avg_stop_time_s", "Avg stop time (s)"],
  ["throughput_veh_per_h", "Throughput (veh/h)"],
  ["equipped_fraction_actual", "Equipped fraction"],
  ["sim_time_s", "Sim time (s)"],
];

/** The 12 labeled statistics, in panel order, values verbatim from the
 * snapshot. */
export function statsRows(stats: SnapshotStats): StatsRow[] {
  return STATS_LAYOUT.map(([key, label]) => {
    const value = stats[key];
    const text = Number.isInteger(value) ? String(value) : value.toFixed(3);
    return { key, label, value, text };
  });
}
