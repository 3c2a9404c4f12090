// Typed client for the control API, plus the SSE turn feed.
//
// The event stream is read through fetch streaming rather than
// EventSource so the same code runs in the browser and under vitest;
// reconnects use capped exponential backoff and report state changes so
// the UI can show a banner and trigger a backfill.

import type {
  AuditReport,
  ConnectionState,
  EditAck,
  EditKind,
  EpistemicState,
  TimelinePayload,
  TurnEvent,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    const body = await resp.text();
    throw new ApiError(resp.status, body || resp.statusText);
  }
  return (await resp.json()) as T;
}

export interface EventFeedHandlers {
  onEvent: (event: TurnEvent) => void;
  onState?: (state: ConnectionState, attempt: number) => void;
}

export class EventFeed {
  private stopped = false;
  private attempt = 0;

  constructor(
    private url: string,
    private handlers: EventFeedHandlers,
    private maxBackoffMs = 5000,
  ) {}

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    while (!this.stopped) {
      this.handlers.onState?.(this.attempt === 0 ? "connecting" : "reconnecting", this.attempt);
      try {
        const resp = await fetch(this.url, { headers: { Accept: "text/event-stream" } });
        if (!resp.ok || !resp.body) {
          throw new ApiError(resp.status, "event stream unavailable");
        }
        this.handlers.onState?.("live", this.attempt);
        this.attempt = 0;
        await this.readStream(resp.body);
      } catch {
        // fall through to backoff
      }
      if (this.stopped) break;
      this.attempt += 1;
      const delay = Math.min(this.maxBackoffMs, 250 * 2 ** this.attempt);
      await new Promise((r) => setTimeout(r, delay));
    }
    this.handlers.onState?.("closed", this.attempt);
  }

  private async readStream(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done || this.stopped) return;
      buffer += decoder.decode(value, { stream: true });
      let idx;
      while ((idx = buffer.indexOf("\n\n")) !== -1) {
        const chunk = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 2);
        for (const line of chunk.split("\n")) {
          if (line.startsWith("data: ")) {
            this.handlers.onEvent(JSON.parse(line.slice(6)) as TurnEvent);
          }
        }
      }
    }
  }
}

export class ControlApi {
  constructor(public base: string) {
    this.base = base.replace(/\/$/, "");
  }

  state(): Promise<EpistemicState> {
    return getJson(`${this.base}/state`);
  }

  timeline(): Promise<TimelinePayload> {
    return getJson(`${this.base}/timeline`);
  }

  turns(since: number): Promise<TurnEvent[]> {
    return getJson(`${this.base}/turns?since=${since}`);
  }

  audit(): Promise<AuditReport> {
    return getJson(`${this.base}/audit`);
  }

  async submitEdit(kind: EditKind, payload: Record<string, unknown>): Promise<EditAck> {
    const resp = await fetch(`${this.base}/edit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ kind, payload }),
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? "edit rejected");
    }
    return body as EditAck;
  }

  async runControl(action: "pause" | "resume" | "stop"): Promise<{ paused: boolean; stopped: boolean }> {
    const resp = await fetch(`${this.base}/run/${action}`, { method: "POST" });
    if (!resp.ok) {
      throw new ApiError(resp.status, `run ${action} failed`);
    }
    return (await resp.json()) as { paused: boolean; stopped: boolean };
  }

  events(handlers: EventFeedHandlers): EventFeed {
    return new EventFeed(`${this.base}/events`, handlers);
  }
}
