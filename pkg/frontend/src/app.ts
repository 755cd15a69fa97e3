/**
 * Wiring: snapshot + event stream in, gestures out.
 *
 * The view re-renders from scratch on every accepted event; user gestures
 * trigger exactly one HTTP request each and change nothing locally until
 * the server's events come back.
 */

import { RequestFailed, SessionApi, createSession } from "./api.js";
import { SessionView, applyEvent, fromSnapshot } from "./state.js";
import { GestureHandlers, renderSession } from "./render.js";
import type { ControlRecord, WireEvent } from "./types.js";

export class App {
  private view: SessionView;
  private source: EventSource | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly baseUrl: string,
    private readonly mount: HTMLElement,
    initial: SessionView,
  ) {
    this.view = initial;
  }

  static async boot(baseUrl: string, mount: HTMLElement, sessionId?: string): Promise<App> {
    const api = sessionId
      ? new SessionApi(baseUrl, sessionId)
      : await createSession(baseUrl, "dynamic");
    const snapshot = await api.snapshot();
    const app = new App(api, baseUrl, mount, fromSnapshot(snapshot));
    app.connect(snapshot.revision);
    app.render();
    return app;
  }

  private connect(since: number): void {
    this.source?.close();
    const url = `${this.baseUrl}/sessions/${this.api.sessionId}/events?since=${since}`;
    const source = new EventSource(url);
    this.source = source;
    const dispatch = (raw: MessageEvent) => {
      const event = JSON.parse(raw.data) as WireEvent;
      if (event.revision <= this.view.revision) return; // replayed duplicate
      this.view = applyEvent(this.view, event);
      this.view.connection = "connected";
      this.render();
    };
    for (const kind of [
      "option_delta", "option_set_complete", "chat_delta", "chat_complete",
      "regen_started", "session_options_changed", "error",
    ]) {
      source.addEventListener(kind, dispatch);
    }
    source.onopen = () => {
      if (this.view.connection !== "connected") {
        this.view = { ...this.view, connection: "connected" };
        this.render();
      }
    };
    source.onerror = () => {
      // EventSource reconnects by itself with Last-Event-ID; if the server
      // evicted our revision it answers 409 and we fall back to a snapshot
      this.view = { ...this.view, connection: "reconnecting" };
      this.render();
      void this.recoverIfEvicted();
    };
  }

  private async recoverIfEvicted(): Promise<void> {
    try {
      const probe = await fetch(
        `${this.baseUrl}/sessions/${this.api.sessionId}/events?since=${this.view.revision}&idle=0`,
      );
      if (probe.status === 409) {
        const snapshot = await this.api.snapshot();
        this.view = { ...fromSnapshot(snapshot), connection: "stale" };
        this.connect(snapshot.revision);
        this.render();
      }
      if (probe.body) await probe.body.cancel();
    } catch {
      // plain network loss: keep the reconnecting banner, EventSource retries
    }
  }

  private gesture(run: () => Promise<unknown>): void {
    void run().catch((exc) => {
      const message = exc instanceof RequestFailed ? exc.message : String(exc);
      this.view = { ...this.view, banner: message };
      this.render();
    });
  }

  readonly handlers: GestureHandlers = {
    submitPrompt: (text) => this.gesture(() => this.api.submitPrompt(text)),
    updateOption: (turnId, label, value) =>
      this.gesture(() => this.api.updateOption(turnId, label, value)),
    updateSessionOption: (label, value) =>
      this.gesture(() => {
        const edited = this.view.sessionOptions.map((record: ControlRecord) =>
          record.label === label ? { ...record, value } : record,
        );
        return this.api.importSessionOptions(JSON.stringify(edited));
      }),
    pinOption: (turnId, label) => this.gesture(() => this.api.pinOption(turnId, label)),
    unpinOption: (label) => this.gesture(() => this.api.unpinOption(label)),
    deleteOption: (tier, label) => this.gesture(() => this.api.deleteOption(tier, label)),
    requestControls: (utterance) => this.gesture(() => this.api.requestControls(utterance)),
    importSessionOptions: (text) => this.gesture(() => this.api.importSessionOptions(text)),
  };

  render(): void {
    this.mount.replaceChildren(renderSession(this.view, this.handlers));
  }
}
