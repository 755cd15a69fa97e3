/**
 * Client-side session view: a pure reduction of (snapshot, event log).
 *
 * The server is the source of truth; nothing here mutates on a gesture.
 * Gestures issue one HTTP request each and the resulting events flow back
 * through `applyEvent`, so replaying the same log always yields the same
 * view (and therefore the same DOM).
 */

import type { ControlRecord, SessionSnapshot, WireEvent } from "./types.js";

export interface PendingControl {
  index: number;
  label?: string;
  controlType?: string;
}

export interface TurnView {
  turnId: number;
  userText: string;
  inline: ControlRecord[];
  /** placeholders for options still streaming in */
  pending: PendingControl[];
  generatingOptions: boolean;
  assistantText: string;
  streaming: boolean;
  status: "generating_options" | "generating_response" | "complete" | "errored";
  error: string | null;
}

export interface SessionView {
  sessionId: string;
  mode: "dynamic" | "static";
  revision: number;
  sessionOptions: ControlRecord[];
  turns: TurnView[];
  /** a refinement change was acknowledged and a regeneration is due/running */
  regenPending: boolean;
  /** a session-controls generation is streaming */
  sessionGenerating: boolean;
  sessionPending: PendingControl[];
  banner: string | null;
  connection: "connected" | "reconnecting" | "stale";
}

export function emptyView(sessionId: string, mode: "dynamic" | "static"): SessionView {
  return {
    sessionId,
    mode,
    revision: 0,
    sessionOptions: [],
    turns: [],
    regenPending: false,
    sessionGenerating: false,
    sessionPending: [],
    banner: null,
    connection: "connected",
  };
}

export function fromSnapshot(snapshot: SessionSnapshot): SessionView {
  const view = emptyView(snapshot.session_id, snapshot.mode);
  view.revision = snapshot.revision;
  view.sessionOptions = snapshot.session_options;
  view.turns = snapshot.turns.map((turn) => ({
    turnId: turn.turn_id,
    userText: turn.user_text,
    inline: turn.inline_options,
    pending: [],
    generatingOptions: turn.status === "generating_options",
    assistantText: turn.assistant_text ?? "",
    streaming: turn.status === "generating_response",
    status: turn.status as TurnView["status"],
    error: turn.error,
  }));
  return view;
}

function cloneView(view: SessionView): SessionView {
  return {
    ...view,
    sessionOptions: [...view.sessionOptions],
    sessionPending: [...view.sessionPending],
    turns: view.turns.map((turn) => ({
      ...turn,
      inline: [...turn.inline],
      pending: [...turn.pending],
    })),
  };
}

function turnById(view: SessionView, turnId: number | undefined): TurnView | undefined {
  return view.turns.find((t) => t.turnId === turnId);
}

function ensureTurn(view: SessionView, turnId: number, userText: string): TurnView {
  let turn = turnById(view, turnId);
  if (!turn) {
    turn = {
      turnId,
      userText,
      inline: [],
      pending: [],
      generatingOptions: false,
      assistantText: "",
      streaming: false,
      status: "generating_response",
      error: null,
    };
    view.turns.push(turn);
    view.turns.sort((a, b) => a.turnId - b.turnId);
  }
  return turn;
}

function setValue(controls: ControlRecord[], label: string, value: string | string[]): void {
  const control = controls.find((c) => c.label === label);
  if (control) control.value = value;
}

function applyOptionDelta(view: SessionView, event: WireEvent): void {
  const p = event.payload;
  const phase = p.phase as string;
  const tier = p.tier as string | undefined;
  const isSession = tier === "session";
  const turn = isSession ? undefined : turnById(view, event.turn_id);

  switch (phase) {
    case "generation_started":
      if (isSession) {
        view.sessionGenerating = true;
        view.sessionPending = [];
      } else if (event.turn_id !== undefined) {
        const created = ensureTurn(view, event.turn_id, (p.user_text as string) ?? "");
        created.status = "generating_options";
        created.generatingOptions = true;
      }
      break;
    case "started": {
      const pending = { index: p.index as number };
      if (isSession) view.sessionPending.push(pending);
      else turn?.pending.push(pending);
      break;
    }
    case "field": {
      const list = isSession ? view.sessionPending : turn?.pending ?? [];
      const slot = list.find((x) => x.index === (p.index as number));
      if (slot) {
        slot.label = p.label as string;
        slot.controlType = p.control_type as string;
      }
      break;
    }
    case "completed": {
      const record = p.option as unknown as ControlRecord;
      if (isSession) {
        view.sessionPending = view.sessionPending.filter((x) => x.index !== (p.index as number));
      } else if (turn) {
        turn.pending = turn.pending.filter((x) => x.index !== (p.index as number));
        turn.inline.push(record);
      }
      break;
    }
    case "dropped": {
      const list = isSession ? view.sessionPending : turn?.pending ?? [];
      const kept = list.filter((x) => x.index !== (p.index as number));
      if (isSession) view.sessionPending = kept;
      else if (turn) turn.pending = kept;
      break;
    }
    case "value_changed":
      if (turn) {
        setValue(turn.inline, p.label as string, p.value as string | string[]);
        view.regenPending = view.turns.length > 0;
      }
      break;
    case "deleted":
      if (turn) {
        turn.inline = turn.inline.filter((c) => c.label !== (p.label as string));
        view.regenPending = view.turns.length > 0;
      }
      break;
  }
}

function applySessionOptionsChanged(view: SessionView, event: WireEvent): void {
  const p = event.payload;
  const change = p.change as string;
  const options = (p.options as unknown as ControlRecord[]) ?? [];
  if (change === "pinned") {
    const turn = turnById(view, event.turn_id);
    if (turn) turn.inline = turn.inline.filter((c) => c.label !== (p.label as string));
  } else if (change === "unpinned") {
    const turn = turnById(view, event.turn_id);
    const moved = view.sessionOptions.find((c) => c.label === (p.label as string));
    if (turn && moved) turn.inline.push(moved);
  }
  view.sessionOptions = options;
  if (view.turns.length > 0) view.regenPending = true;
}

/** Pure event reduction; returns a new view, never mutates the input. */
export function applyEvent(previous: SessionView, event: WireEvent): SessionView {
  const view = cloneView(previous);
  view.revision = event.revision;
  switch (event.kind) {
    case "option_delta":
      applyOptionDelta(view, event);
      break;
    case "session_options_changed":
      applySessionOptionsChanged(view, event);
      break;
    case "option_set_complete": {
      const tier = event.payload.tier as string;
      const options = event.payload.options as unknown as ControlRecord[];
      if (tier === "inline") {
        const turn = turnById(view, event.turn_id);
        if (turn) {
          turn.inline = options;
          turn.pending = [];
          turn.generatingOptions = false;
          turn.status = "generating_response";
        }
      } else {
        view.sessionGenerating = false;
        view.sessionPending = [];
      }
      break;
    }
    case "regen_started": {
      const userText = event.payload.user_text as string | undefined;
      if (event.turn_id !== undefined && userText !== undefined) {
        ensureTurn(view, event.turn_id, userText);
      }
      const turn = turnById(view, event.turn_id);
      if (turn) {
        turn.streaming = true;
        turn.assistantText = "";
        if (turn.status === "generating_options") turn.status = "generating_response";
      }
      view.regenPending = true;
      break;
    }
    case "chat_delta": {
      const turn = turnById(view, event.turn_id);
      if (turn) turn.assistantText += event.payload.text as string;
      break;
    }
    case "chat_complete": {
      const turn = turnById(view, event.turn_id);
      if (turn) {
        turn.assistantText = event.payload.text as string;
        turn.streaming = false;
        turn.status = "complete";
        turn.error = null;
      }
      view.regenPending = false;
      break;
    }
    case "error": {
      const name = event.payload.name as string;
      view.banner = `${name}: ${event.payload.detail as string}`;
      if (name === "BackendError") {
        const turn = turnById(view, event.turn_id);
        if (turn) {
          turn.streaming = false;
          turn.status = "errored";
          turn.error = event.payload.detail as string;
        }
        view.regenPending = false;
      }
      if (name === "DecodeFailed") {
        const turn = turnById(view, event.turn_id);
        if (turn) {
          turn.pending = [];
          turn.generatingOptions = false;
        }
        view.sessionGenerating = false;
        view.sessionPending = [];
      }
      break;
    }
  }
  return view;
}

export function applyLog(initial: SessionView, events: WireEvent[]): SessionView {
  return events.reduce(applyEvent, initial);
}
