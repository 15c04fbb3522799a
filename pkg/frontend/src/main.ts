/**
 * Browser entry point: wires the WebSocket feed, the canvas scene, the
 * statistics panel, the steering controls and the signal-timing editor.
 *
 * The page holds no simulation truth: reloading reconnects and rebuilds
 * the view from the next snapshot. Controls lock while a command awaits
 * its ack; errors surface as a toast (or inside the editor for plan
 * rejections).
 */

import { applyGesture, buildApplyCommand, changeCycle, openEditor,
         setCursor, toggleLane } from "./editor.js";
import { flowSliderCommand, endButtonCommand, ratioSliderCommand,
         speedRadioCommand } from "./controls.js";
import { APPROACHES, Approach, Command, LANE_IDS, PlanSegment,
         SpeedModeName, encodeCommand, parseServerFrame } from "./protocol.js";
import { renderScene, statsRows, Viewport } from "./render.js";
import { UiState, controlsLocked, initialState, isStale, nextRequestId,
         onClose, onFrame, onOpen, trackCommand } from "./state.js";

const VIEW_WINDOW_M = 150;   // meters of approach shown before the stop line

const state: UiState = initialState();
let ws: WebSocket | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function send(command: Command): void {
  if (!ws || ws.readyState !== WebSocket.OPEN) {
    showToast("not connected");
    return;
  }
  trackCommand(state, command, performance.now());
  ws.send(encodeCommand(command));
  syncControlLocks();
}

function showToast(message: string): void {
  const toast = $("toast");
  toast.textContent = message;
  toast.classList.add("visible");
  window.setTimeout(() => toast.classList.remove("visible"), 4000);
}

function connect(): void {
  ws = new WebSocket(`ws://${location.host}/ws`);
  ws.addEventListener("open", () => {
    onOpen(state);
    $("conn").textContent = "connected";
    $("conn").className = "badge ok";
  });
  ws.addEventListener("close", () => {
    onClose(state);
    $("conn").textContent = "disconnected";
    $("conn").className = "badge bad";
    syncControlLocks();
    window.setTimeout(connect, 1500);
  });
  ws.addEventListener("message", (ev) => {
    const before = state.toast;
    try {
      onFrame(state, parseServerFrame(String(ev.data)), performance.now());
    } catch (err) {
      console.warn("bad frame", err);
      return;
    }
    if (state.toast && state.toast !== before) {
      showToast(state.toast);
      state.toast = null;
    }
    syncControlLocks();
    renderEditor();
    refreshPanel();
  });
}

// ------------------------------------------------------------------ controls

function syncControlLocks(): void {
  const locked = controlsLocked(state) || state.connection !== "open";
  document.querySelectorAll<HTMLInputElement | HTMLButtonElement>(".control")
    .forEach((el) => { el.disabled = locked; });
}

function wireControls(): void {
  for (const a of APPROACHES) {
    const slider = $(`flow-${a}`) as HTMLInputElement;
    const label = $(`flow-${a}-value`);
    slider.addEventListener("input", () => {
      label.textContent = `${slider.value} veh/h`;
    });
    slider.addEventListener("change", () => {
      send(flowSliderCommand(a as Approach, Number(slider.value),
                             nextRequestId(state)));
    });
  }
  const ratio = $("ratio") as HTMLInputElement;
  ratio.addEventListener("input", () => {
    $("ratio-value").textContent = `${ratio.value}%`;
  });
  ratio.addEventListener("change", () => {
    send(ratioSliderCommand(Number(ratio.value), nextRequestId(state)));
  });
  document.querySelectorAll<HTMLInputElement>("input[name=speed]")
    .forEach((radio) => {
      radio.addEventListener("change", () => {
        if (radio.checked) {
          send(speedRadioCommand(radio.value as SpeedModeName,
                                 nextRequestId(state)));
        }
      });
    });
  $("end").addEventListener("click", () => {
    send(endButtonCommand(nextRequestId(state)));
  });
}

// ------------------------------------------------------------------- editor

function wireEditor(): void {
  $("edit").addEventListener("click", () => {
    if (!state.snapshot) {
      showToast("no snapshot yet");
      return;
    }
    state.editor = openEditor(state.snapshot.config.plan);
    renderEditor();
  });
  ($("cycle") as HTMLInputElement).addEventListener("change", (ev) => {
    if (!state.editor) return;
    state.editor = changeCycle(state.editor,
                               Number((ev.target as HTMLInputElement).value));
    renderEditor();
  });
  ($("cursor") as HTMLInputElement).addEventListener("change", (ev) => {
    if (!state.editor) return;
    state.editor = setCursor(state.editor,
                             Number((ev.target as HTMLInputElement).value));
    renderEditor();
  });
  for (const color of ["red", "yellow", "green"] as const) {
    $(`set-${color}`).addEventListener("click", () => {
      if (!state.editor) return;
      state.editor = applyGesture(state.editor, color);
      renderEditor();
    });
  }
  $("editor-apply").addEventListener("click", () => {
    if (!state.editor) return;
    const result = buildApplyCommand(state.editor, nextRequestId(state));
    if (!result.ok) {
      state.editor = result.state;
      renderEditor();
      return;
    }
    send(result.command);
  });
  $("editor-cancel").addEventListener("click", () => {
    state.editor = null;
    renderEditor();
  });
}

function renderEditor(): void {
  const panel = $("editor");
  const ed = state.editor;
  if (!ed || !ed.open) {
    panel.classList.add("hidden");
    return;
  }
  panel.classList.remove("hidden");
  ($("cycle") as HTMLInputElement).value = String(ed.cycleInput);
  ($("cursor") as HTMLInputElement).value = String(ed.cursor);
  const violation = $("violation");
  violation.textContent = ed.violation ?? "";
  violation.classList.toggle("visible", ed.violation !== null);

  const lanes = $("editor-lanes");
  if (!lanes.childElementCount) {
    for (const lane of LANE_IDS) {
      const row = document.createElement("div");
      row.className = "lane-row";
      const box = document.createElement("input");
      box.type = "checkbox";
      box.id = `lane-${lane}`;
      box.addEventListener("change", () => {
        if (state.editor) state.editor = toggleLane(state.editor, lane);
        renderEditor();
      });
      const name = document.createElement("label");
      name.htmlFor = box.id;
      name.textContent = lane;
      const bar = document.createElement("div");
      bar.className = "timeline";
      bar.id = `timeline-${lane}`;
      row.append(box, name, bar);
      lanes.append(row);
    }
  }
  for (const lane of LANE_IDS) {
    const box = document.getElementById(`lane-${lane}`) as HTMLInputElement;
    box.checked = ed.selectedLanes.includes(lane);
    const bar = $(`timeline-${lane}`);
    bar.innerHTML = "";
    for (const seg of ed.draft.lanes[lane]) {
      bar.append(timelineChip(seg, ed.draft.cycle_s));
    }
    const cursorMark = document.createElement("div");
    cursorMark.className = "cursor-mark";
    cursorMark.style.left = `${(ed.cursor / ed.draft.cycle_s) * 100}%`;
    bar.append(cursorMark);
  }
}

function timelineChip(seg: PlanSegment, cycle: number): HTMLElement {
  const chip = document.createElement("div");
  chip.className = `chip ${seg.color}`;
  chip.style.left = `${(seg.start_s / cycle) * 100}%`;
  chip.style.width = `${((seg.end_s - seg.start_s) / cycle) * 100}%`;
  chip.title = `${seg.color} ${seg.start_s}-${seg.end_s} s`;
  return chip;
}

// ----------------------------------------------------------------- painting

function refreshPanel(): void {
  if (!state.snapshot) return;
  const tbody = $("stats");
  tbody.innerHTML = "";
  for (const row of statsRows(state.snapshot.stats)) {
    const tr = document.createElement("tr");
    const name = document.createElement("td");
    name.textContent = row.label;
    const value = document.createElement("td");
    value.textContent = row.text;
    value.dataset.key = row.key;
    tr.append(name, value);
    tbody.append(tr);
  }
  const cfg = state.snapshot.config;
  for (const a of APPROACHES) {
    const slider = $(`flow-${a}`) as HTMLInputElement;
    if (document.activeElement !== slider) {
      slider.value = String(cfg.flows[a as Approach]);
      $(`flow-${a}-value`).textContent = `${cfg.flows[a as Approach]} veh/h`;
    }
  }
  const ratio = $("ratio") as HTMLInputElement;
  if (document.activeElement !== ratio) {
    ratio.value = String(Math.round(cfg.equipped_ratio * 100));
    $("ratio-value").textContent = `${Math.round(cfg.equipped_ratio * 100)}%`;
  }
}

function paint(): void {
  const canvas = $("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx && state.snapshot) {
    const view: Viewport = {
      width: canvas.width,
      height: canvas.height,
      windowM: VIEW_WINDOW_M,
      approachLength: state.snapshot.config.approach_length,
    };
    renderScene(ctx, state.snapshot, view);
  }
  $("stale").classList.toggle("visible",
                              isStale(state, performance.now())
                              || state.connection !== "open");
  requestAnimationFrame(paint);
}

window.addEventListener("load", () => {
  wireControls();
  wireEditor();
  connect();
  requestAnimationFrame(paint);
});
