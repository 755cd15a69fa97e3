/**
 * Pure DOM construction from a SessionView. No network, no globals, no
 * randomness: the same view always renders the same tree, which is what
 * the snapshot tests pin down.
 *
 * Widget kinds derive solely from the control record: radio group for
 * single-select, checkbox group for multi-select, a multi-line text area
 * for text controls. Controls on older turns are disabled; while a
 * regeneration is pending everything is greyed out rather than applied
 * optimistically.
 */

import type { ControlRecord } from "./types.js";
import type { PendingControl, SessionView, TurnView } from "./state.js";

export interface GestureHandlers {
  submitPrompt(text: string): void;
  updateOption(turnId: number, label: string, value: string | string[]): void;
  /** session-tier value change; implemented as one wholesale JSON PUT */
  updateSessionOption(label: string, value: string | string[]): void;
  pinOption(turnId: number, label: string): void;
  unpinOption(label: string): void;
  deleteOption(tier: "session" | "inline", label: string): void;
  requestControls(utterance: string): void;
  importSessionOptions(text: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function slug(text: string): string {
  return text.toLowerCase().replace(/[^a-z0-9]+/g, "-");
}

function tooltip(record: ControlRecord): string {
  return `${record.description}\n${record.reason}`;
}

function selectedValues(record: ControlRecord): string[] {
  return Array.isArray(record.value) ? record.value : [record.value];
}

interface ControlContext {
  turnId: number | null; // null = session tier
  disabled: boolean;
  pinnable: boolean;
  handlers: GestureHandlers;
}

function renderChoiceControl(record: ControlRecord, ctx: ControlContext): HTMLElement {
  const multi = record.appearance === "multi-select-checkbox";
  const group = el("fieldset", multi ? "control checkbox-group" : "control radio-group");
  group.title = tooltip(record);
  if (ctx.disabled) {
    group.disabled = true;
    group.setAttribute("disabled", "");
  }
  const legend = el("legend", "control-label", record.label);
  group.appendChild(legend);
  const name = `${ctx.turnId === null ? "session" : `turn-${ctx.turnId}`}-${slug(record.label)}`;
  const selected = selectedValues(record);
  for (const [choiceLabel, description] of Object.entries(record.options ?? {})) {
    const wrapper = el("label", "choice");
    wrapper.title = description;
    const input = el("input");
    input.type = multi ? "checkbox" : "radio";
    input.name = name;
    input.value = description;
    input.checked = selected.includes(description);
    input.disabled = ctx.disabled;
    input.addEventListener("change", () => {
      if (multi) {
        const boxes = group.querySelectorAll<HTMLInputElement>("input[type=checkbox]");
        const values = Array.from(boxes).filter((b) => b.checked).map((b) => b.value);
        sendUpdate(record, ctx, values);
      } else {
        sendUpdate(record, ctx, description);
      }
    });
    wrapper.appendChild(input);
    wrapper.appendChild(el("span", "choice-label", choiceLabel));
    group.appendChild(wrapper);
  }
  appendControlActions(group, record, ctx);
  return group;
}

function renderTextControl(record: ControlRecord, ctx: ControlContext): HTMLElement {
  const wrapper = el("fieldset", "control text-control");
  wrapper.title = tooltip(record);
  if (ctx.disabled) {
    wrapper.disabled = true;
    wrapper.setAttribute("disabled", "");
  }
  wrapper.appendChild(el("legend", "control-label", record.label));
  const area = el("textarea", "text-value");
  area.value = typeof record.value === "string" ? record.value : "";
  area.rows = 3;
  area.disabled = ctx.disabled;
  area.addEventListener("change", () => sendUpdate(record, ctx, area.value));
  wrapper.appendChild(area);
  appendControlActions(wrapper, record, ctx);
  return wrapper;
}

function sendUpdate(record: ControlRecord, ctx: ControlContext, value: string | string[]): void {
  if (ctx.turnId !== null) {
    ctx.handlers.updateOption(ctx.turnId, record.label, value);
  } else {
    ctx.handlers.updateSessionOption(record.label, value);
  }
}

function appendControlActions(node: HTMLElement, record: ControlRecord, ctx: ControlContext): void {
  const actions = el("div", "control-actions");
  if (ctx.pinnable && ctx.turnId !== null) {
    const pin = el("button", "pin", "pin");
    pin.type = "button";
    pin.title = "Apply this option to every prompt in the session";
    pin.disabled = ctx.disabled;
    pin.addEventListener("click", () => ctx.handlers.pinOption(ctx.turnId as number, record.label));
    actions.appendChild(pin);
  }
  if (ctx.turnId === null) {
    const unpin = el("button", "unpin", "unpin");
    unpin.type = "button";
    unpin.disabled = ctx.disabled;
    unpin.addEventListener("click", () => ctx.handlers.unpinOption(record.label));
    actions.appendChild(unpin);
    const remove = el("button", "delete", "delete");
    remove.type = "button";
    remove.disabled = ctx.disabled;
    remove.addEventListener("click", () => ctx.handlers.deleteOption("session", record.label));
    actions.appendChild(remove);
  } else {
    const remove = el("button", "delete", "delete");
    remove.type = "button";
    remove.disabled = ctx.disabled;
    remove.addEventListener("click", () => ctx.handlers.deleteOption("inline", record.label));
    actions.appendChild(remove);
  }
  node.appendChild(actions);
}

export function renderControl(record: ControlRecord, ctx: ControlContext): HTMLElement {
  return record.type === "text" ? renderTextControl(record, ctx) : renderChoiceControl(record, ctx);
}

function renderPending(pending: PendingControl[]): HTMLElement {
  const list = el("div", "pending-controls");
  for (const item of pending) {
    const placeholder = el("div", "pending-control spinner");
    placeholder.dataset.index = String(item.index);
    placeholder.textContent = item.label ? `${item.label}…` : "…";
    list.appendChild(placeholder);
  }
  return list;
}

function renderTurn(view: SessionView, turn: TurnView, handlers: GestureHandlers): HTMLElement {
  const isLatest = view.turns.length > 0 && view.turns[view.turns.length - 1].turnId === turn.turnId;
  const section = el("section", isLatest ? "turn latest" : "turn frozen");
  section.dataset.turn = String(turn.turnId);

  const user = el("div", "user-message", turn.userText);
  section.appendChild(user);

  const controls = el("div", "inline-controls");
  const disabled = !isLatest || view.regenPending || turn.generatingOptions;
  for (const record of turn.inline) {
    controls.appendChild(
      renderControl(record, {
        turnId: turn.turnId,
        disabled,
        pinnable: isLatest && !view.sessionOptions.some((o) => o.label === record.label),
        handlers,
      }),
    );
  }
  if (turn.pending.length > 0) controls.appendChild(renderPending(turn.pending));
  section.appendChild(controls);

  const response = el(
    "div",
    turn.streaming ? "assistant-message streaming" : "assistant-message",
    turn.assistantText,
  );
  section.appendChild(response);
  if (turn.status === "errored" && turn.error) {
    section.appendChild(el("div", "turn-error", turn.error));
  }
  if ((turn.streaming || (view.regenPending && isLatest)) && !turn.generatingOptions) {
    section.appendChild(el("div", "regen-indicator spinner", "regenerating"));
  }
  return section;
}

function renderSessionPanel(view: SessionView, handlers: GestureHandlers): HTMLElement {
  const panel = el("aside", "session-panel");
  panel.appendChild(el("h2", "panel-title", "Chat controls"));

  const options = el("div", "session-controls");
  for (const record of view.sessionOptions) {
    options.appendChild(
      renderControl(record, {
        turnId: null,
        disabled: view.regenPending,
        pinnable: false,
        handlers,
      }),
    );
  }
  if (view.sessionPending.length > 0) options.appendChild(renderPending(view.sessionPending));
  panel.appendChild(options);

  if (view.mode === "dynamic") {
    const addRow = el("div", "add-controls");
    const input = el("input", "add-controls-input");
    input.placeholder = "Describe the controls you want";
    const button = el("button", "add-controls-button", "Add controls");
    button.type = "button";
    button.disabled = view.sessionGenerating;
    button.addEventListener("click", () => {
      if (input.value.trim()) handlers.requestControls(input.value);
    });
    addRow.appendChild(input);
    addRow.appendChild(button);
    panel.appendChild(addRow);
  }

  const editor = el("div", "json-editor");
  editor.appendChild(el("h3", "editor-title", "Session options JSON"));
  const area = el("textarea", "json-editor-area");
  area.rows = 10;
  area.value = JSON.stringify(view.sessionOptions, null, 2);
  const error = el("div", "json-editor-error");
  const apply = el("button", "json-editor-apply", "Apply JSON");
  apply.type = "button";
  apply.addEventListener("click", () => {
    // client-side parse check; nothing is sent when the text is malformed
    try {
      JSON.parse(area.value);
    } catch (exc) {
      error.textContent = `Invalid JSON: ${(exc as Error).message}`;
      return;
    }
    error.textContent = "";
    handlers.importSessionOptions(area.value);
  });
  editor.appendChild(area);
  editor.appendChild(error);
  editor.appendChild(apply);
  panel.appendChild(editor);
  return panel;
}

export function renderSession(view: SessionView, handlers: GestureHandlers): HTMLElement {
  const root = el("div", `session mode-${view.mode} connection-${view.connection}`);
  root.dataset.revision = String(view.revision);

  if (view.banner) root.appendChild(el("div", "banner error-banner", view.banner));
  if (view.connection === "stale") {
    root.appendChild(
      el("div", "banner stale-banner", "Event history expired; reloaded from the latest snapshot."),
    );
  } else if (view.connection === "reconnecting") {
    root.appendChild(el("div", "banner reconnect-banner", "Connection lost; reconnecting…"));
  }

  const chat = el("main", "chat-pane");
  for (const turn of view.turns) chat.appendChild(renderTurn(view, turn, handlers));

  const composer = el("form", "composer");
  const input = el("textarea", "composer-input");
  input.rows = 2;
  input.placeholder = "Ask something…";
  const send = el("button", "composer-send", "Send");
  send.type = "submit";
  const generating = view.turns.some((t) => t.generatingOptions || t.streaming);
  send.disabled = generating;
  composer.addEventListener("submit", (event) => {
    event.preventDefault();
    if (input.value.trim()) handlers.submitPrompt(input.value);
  });
  composer.appendChild(input);
  composer.appendChild(send);
  chat.appendChild(composer);

  root.appendChild(chat);
  root.appendChild(renderSessionPanel(view, handlers));
  return root;
}
