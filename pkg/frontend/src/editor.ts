/**
 * Signal-timing editor: a draft plan plus the gesture that paints every
 * selected lane from the cursor to the end of the cycle.
 *
 * The draft mirrors the server's plan rules exactly (full coverage, no
 * overlaps, merged neighbors), so anything that passes local validation
 * is expected to be acked; a server rejection is surfaced verbatim and
 * the draft stays open for correction. Changing the cycle length resets
 * all lanes to red: there is no well-defined way to rescale segments, so
 * the editor demands explicit recoloring.
 */

import { LANE_IDS, LaneId, PlanDoc, PlanSegment, SetPlanCommand,
         SignalColor, RequestId, setPlan } from "./protocol.js";

export function defaultPlan(): PlanDoc {
  const lanes: Record<LaneId, PlanSegment[]> = {};
  for (const lane of LANE_IDS) {
    if (lane[0] === "E" || lane[0] === "W") {
      lanes[lane] = [{ color: "green", start_s: 0, end_s: 45 },
                     { color: "red", start_s: 45, end_s: 90 }];
    } else {
      lanes[lane] = [{ color: "red", start_s: 0, end_s: 45 },
                     { color: "green", start_s: 45, end_s: 90 }];
    }
  }
  return { cycle_s: 90, lanes };
}

export function allRedPlan(cycleS: number): PlanDoc {
  const lanes: Record<LaneId, PlanSegment[]> = {};
  for (const lane of LANE_IDS) {
    lanes[lane] = [{ color: "red", start_s: 0, end_s: cycleS }];
  }
  return { cycle_s: cycleS, lanes };
}

export function clonePlan(plan: PlanDoc): PlanDoc {
  const lanes: Record<LaneId, PlanSegment[]> = {};
  for (const lane of Object.keys(plan.lanes)) {
    lanes[lane] = plan.lanes[lane].map((s) => ({ ...s }));
  }
  return { cycle_s: plan.cycle_s, lanes };
}

function mergeSegments(segments: PlanSegment[]): PlanSegment[] {
  const merged: PlanSegment[] = [];
  for (const seg of segments) {
    const last = merged[merged.length - 1];
    if (last && last.color === seg.color && last.end_s === seg.start_s) {
      last.end_s = seg.end_s;
    } else {
      merged.push({ ...seg });
    }
  }
  return merged;
}

/** Paint [cursor, cycle_s) of the selected lanes; throws RangeError when
 * the cursor is outside [0, cycle_s). */
export function setColorBehind(plan: PlanDoc, lanes: LaneId[], cursor: number,
                               color: SignalColor): PlanDoc {
  if (!(cursor >= 0 && cursor < plan.cycle_s)) {
    throw new RangeError(`cursor ${cursor} outside [0, ${plan.cycle_s})`);
  }
  const next = clonePlan(plan);
  for (const lane of lanes) {
    if (!(lane in next.lanes)) {
      throw new RangeError(`unknown lane: ${lane}`);
    }
    const kept = next.lanes[lane]
      .filter((s) => s.start_s < cursor)
      .map((s) => ({ ...s, end_s: Math.min(s.end_s, cursor) }));
    kept.push({ color, start_s: cursor, end_s: next.cycle_s });
    next.lanes[lane] = mergeSegments(kept);
  }
  return next;
}

/** Same invariants the server checks; empty list means valid. */
export function validatePlan(plan: PlanDoc): string[] {
  const problems: string[] = [];
  if (!(plan.cycle_s > 0)) {
    problems.push("cycle_s must be > 0");
    return problems;
  }
  for (const lane of LANE_IDS) {
    if (!(lane in plan.lanes)) {
      problems.push(`missing lane: ${lane}`);
    }
  }
  for (const lane of Object.keys(plan.lanes)) {
    if (!LANE_IDS.includes(lane)) {
      problems.push(`unknown lane: ${lane}`);
    }
  }
  if (problems.length) {
    return problems;
  }
  for (const lane of LANE_IDS) {
    const segs = plan.lanes[lane];
    if (!segs.length) {
      problems.push(`lane ${lane}: no segments`);
      continue;
    }
    if (segs[0].start_s !== 0) {
      problems.push(`lane ${lane}: coverage gap before first segment`);
    }
    for (const seg of segs) {
      if (!(seg.end_s > seg.start_s)) {
        problems.push(`lane ${lane}: empty or inverted segment [${seg.start_s}, ${seg.end_s})`);
      }
    }
    for (let i = 1; i < segs.length; i++) {
      if (segs[i].start_s < segs[i - 1].end_s) {
        problems.push(`lane ${lane}: overlapping segments at ${segs[i].start_s}`);
      } else if (segs[i].start_s > segs[i - 1].end_s) {
        problems.push(`lane ${lane}: coverage gap at ${segs[i - 1].end_s}`);
      }
    }
    if (segs[segs.length - 1].end_s !== plan.cycle_s) {
      problems.push(`lane ${lane}: coverage ends before the cycle end`);
    }
  }
  return problems;
}

export interface EditorState {
  open: boolean;
  draft: PlanDoc;
  cycleInput: number;
  cursor: number;
  selectedLanes: LaneId[];
  /** local validation or server rejection to highlight; null when clean */
  violation: string | null;
}

export function openEditor(livePlan: PlanDoc): EditorState {
  return {
    open: true,
    draft: clonePlan(livePlan),
    cycleInput: livePlan.cycle_s,
    cursor: 0,
    selectedLanes: [],
    violation: null,
  };
}

export function setCursor(state: EditorState, cursor: number): EditorState {
  if (!(cursor >= 0 && cursor < state.draft.cycle_s)) {
    return { ...state,
             violation: `cursor ${cursor} outside [0, ${state.draft.cycle_s})` };
  }
  return { ...state, cursor, violation: null };
}

export function toggleLane(state: EditorState, lane: LaneId): EditorState {
  const selected = state.selectedLanes.includes(lane)
    ? state.selectedLanes.filter((l) => l !== lane)
    : [...state.selectedLanes, lane];
  return { ...state, selectedLanes: selected };
}

/** The three "set <color> behind" buttons. */
export function applyGesture(state: EditorState, color: SignalColor): EditorState {
  if (!state.selectedLanes.length) {
    return { ...state, violation: "select at least one lane" };
  }
  try {
    const draft = setColorBehind(state.draft, state.selectedLanes,
                                 state.cursor, color);
    return { ...state, draft, violation: null };
  } catch (err) {
    return { ...state, violation: (err as Error).message };
  }
}

/** Cycle change resets every lane to red; segments are not rescaled. */
export function changeCycle(state: EditorState, cycleS: number): EditorState {
  if (!(cycleS > 0) || !Number.isFinite(cycleS)) {
    return { ...state, violation: "cycle must be a positive number" };
  }
  return { ...state, cycleInput: cycleS, draft: allRedPlan(cycleS),
           cursor: 0, violation: null };
}

export type ApplyResult =
  | { ok: true; command: SetPlanCommand }
  | { ok: false; state: EditorState };

/** Validate locally; only a clean draft produces a set_plan command. */
export function buildApplyCommand(state: EditorState,
                                  requestId: RequestId): ApplyResult {
  const problems = validatePlan(state.draft);
  if (problems.length) {
    return { ok: false, state: { ...state, violation: problems.join("; ") } };
  }
  return { ok: true, command: setPlan(clonePlan(state.draft), requestId) };
}

/** A server rejection reopens the editor with the violation highlighted. */
export function surfaceServerRejection(state: EditorState,
                                       message: string): EditorState {
  return { ...state, open: true, violation: message };
}
