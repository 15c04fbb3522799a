/**
 * Client state: one snapshot of truth, pending command acknowledgments,
 * and the editor draft. The rendered view always derives from exactly
 * one snapshot; nothing here mutates simulation state without an ack.
 */

import { EditorState, surfaceServerRejection } from "./editor.js";
import { Ack, Command, ErrorReply, RequestId, ServerFrame,
         Snapshot } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export const STALE_AFTER_MS = 1000;

export interface PendingCommand {
  command: Command;
  sentAt: number;
}

export interface UiState {
  connection: ConnectionStatus;
  snapshot: Snapshot | null;
  snapshotAt: number | null;      // wall clock of the last snapshot, ms
  pending: Map<RequestId, PendingCommand>;
  toast: string | null;
  editor: EditorState | null;
  requestCounter: number;
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    snapshot: null,
    snapshotAt: null,
    pending: new Map(),
    toast: null,
    editor: null,
    requestCounter: 0,
  };
}

export function nextRequestId(state: UiState): RequestId {
  state.requestCounter += 1;
  return `c${state.requestCounter}`;
}

export function onOpen(state: UiState): void {
  state.connection = "open";
}

export function onClose(state: UiState): void {
  state.connection = "closed";
  state.pending.clear();
}

export function trackCommand(state: UiState, command: Command, now: number): void {
  state.pending.set(command.request_id, { command, sentAt: now });
}

/** Controls stay disabled while a command awaits its ack or error. */
export function controlsLocked(state: UiState): boolean {
  return state.pending.size > 0;
}

export function isStale(state: UiState, now: number): boolean {
  return state.snapshotAt !== null && now - state.snapshotAt > STALE_AFTER_MS;
}

export function onFrame(state: UiState, frame: ServerFrame, now: number): void {
  switch (frame.type) {
    case "snapshot":
      state.snapshot = frame as Snapshot;
      state.snapshotAt = now;
      return;
    case "ack": {
      const ack = frame as Ack;
      const pending = state.pending.get(ack.request_id);
      state.pending.delete(ack.request_id);
      if (pending?.command.type === "set_plan" && state.editor) {
        state.editor = { ...state.editor, open: false, violation: null };
      }
      return;
    }
    case "error": {
      const err = frame as ErrorReply;
      if (err.request_id !== null) {
        const pending = state.pending.get(err.request_id);
        state.pending.delete(err.request_id);
        if (pending?.command.type === "set_plan" && state.editor) {
          state.editor = surfaceServerRejection(state.editor, err.message);
          return;
        }
      }
      state.toast = err.message;
      return;
    }
  }
}
