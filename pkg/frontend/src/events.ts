// Server-sent event subscription with auto-reconnect. The EventSource
// constructor is injectable so tests can drive the stream synchronously.

import type { GatewayEvent } from "./types.js";

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamCallbacks {
  onEvent: (event: GatewayEvent) => void;
  onStatus: (status: "connecting" | "live" | "lost") => void;
}

const MAX_BACKOFF_MS = 15000;

export class EventStream {
  private source: EventSourceLike | null = null;
  private attempts = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly callbacks: StreamCallbacks,
    private readonly factory: EventSourceFactory,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.source?.close();
    this.source = null;
  }

  private connect(): void {
    this.callbacks.onStatus(this.attempts === 0 ? "connecting" : "lost");
    this.source = this.factory(this.url);
    this.source.onopen = () => {
      this.attempts = 0;
      this.callbacks.onStatus("live");
    };
    this.source.onmessage = (ev) => {
      let parsed: GatewayEvent;
      try {
        parsed = JSON.parse(ev.data) as GatewayEvent;
      } catch {
        return; // keepalives and partial lines are not JSON
      }
      this.callbacks.onStatus("live");
      this.callbacks.onEvent(parsed);
    };
    this.source.onerror = () => {
      this.source?.close();
      this.source = null;
      this.callbacks.onStatus("lost");
      if (this.stopped) return;
      const backoff = Math.min(500 * 2 ** this.attempts, MAX_BACKOFF_MS);
      this.attempts += 1;
      this.timer = setTimeout(() => this.connect(), backoff);
    };
  }
}
