/** Wire shapes shared with the backend. */

export type Appearance = "single-select-radio" | "multi-select-checkbox";

export interface ControlRecord {
  type: "option" | "text";
  label: string;
  description: string;
  options?: Record<string, string>;
  appearance?: Appearance;
  value: string | string[];
  reason: string;
}

export type EventKind =
  | "option_delta"
  | "option_set_complete"
  | "chat_delta"
  | "chat_complete"
  | "regen_started"
  | "session_options_changed"
  | "error";

export interface WireEvent {
  kind: EventKind;
  session_id: string;
  revision: number;
  turn_id?: number;
  payload: Record<string, unknown>;
}

export interface TurnSnapshot {
  turn_id: number;
  user_text: string;
  inline_options: ControlRecord[];
  assistant_text: string | null;
  status: string;
  error: string | null;
}

export interface SessionSnapshot {
  session_id: string;
  mode: "dynamic" | "static";
  session_options: ControlRecord[];
  turns: TurnSnapshot[];
  revision: number;
}
