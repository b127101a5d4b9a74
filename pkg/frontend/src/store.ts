// Single state container for the dashboard. All server input (state polls,
// SSE events) and all user gestures flow through here; the DOM layer only
// renders the result. Mode always equals the last server-confirmed value;
// a selection in flight is tracked separately as pendingMode.

import { ApiError, GatewayClient } from "./api.js";
import {
  Frame,
  GatewayEvent,
  MODE_PIN,
  ModeCode,
  PotIndex,
  RELAY_PINS,
  ServerState,
  THRESHOLD_PIN,
  zoneAverage,
} from "./types.js";

export interface Toast {
  id: number;
  kind: string;
  text: string;
}

export interface FeedEntry {
  seq: number;
  ts: number;
  kind: string;
  pot: number | null;
  message: string;
}

export interface PotSeries {
  observed: { ts: number; value: number }[];
  forecast: { ts: number; value: number }[];
}

export interface ViewState {
  connection: "connecting" | "live" | "lost";
  server: ServerState | null;
  pendingMode: ModeCode | null;
  pendingRelays: Set<PotIndex>;
  toasts: Toast[];
  feed: FeedEntry[];
  gapsDropped: number;
  series: [PotSeries, PotSeries, PotSeries];
}

export const SERIES_WINDOW_S = 3600; // rolling hour of zone averages

const MAX_FEED = 50;
const MAX_TOASTS = 5;

export class DashboardStore {
  state: ViewState = {
    connection: "connecting",
    server: null,
    pendingMode: null,
    pendingRelays: new Set(),
    toasts: [],
    feed: [],
    gapsDropped: 0,
    series: [
      { observed: [], forecast: [] },
      { observed: [], forecast: [] },
      { observed: [], forecast: [] },
    ],
  };

  private lastSeq = 0;
  private nextToastId = 1;
  private listeners: (() => void)[] = [];

  constructor(private readonly client: GatewayClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  // -- derived flags ---------------------------------------------------------

  /** Relay toggles are only live in server-confirmed MANUAL mode. */
  togglesEnabled(): boolean {
    const server = this.state.server;
    return (
      server !== null &&
      server.mode === 3 &&
      server.connected &&
      !server.failsafe &&
      this.state.connection !== "lost"
    );
  }

  mode(): ModeCode | null {
    return this.state.server?.mode ?? null;
  }

  // -- server input -----------------------------------------------------------

  applyServerState(server: ServerState): void {
    this.state.server = server;
    if (this.state.pendingMode !== null && server.mode === this.state.pendingMode) {
      this.state.pendingMode = null; // confirmed
    }
    this.syncForecast(server);
    if (server.latest) this.pushObserved(server.latest);
    this.emit();
  }

  applyEvent(event: GatewayEvent): void {
    if (event.seq <= this.lastSeq) {
      return; // replay after reconnect: already seen
    }
    this.lastSeq = event.seq;
    if (event.type === "snapshot") {
      this.pushObserved(event.frame);
      this.patchFromFrame(event.frame);
    } else if (event.type === "notification") {
      this.state.feed.unshift({
        seq: event.seq,
        ts: event.ts,
        kind: event.kind,
        pot: event.pot,
        message: event.message,
      });
      if (this.state.feed.length > MAX_FEED) this.state.feed.pop();
      if (event.kind === "relay_activated" || event.kind === "sensor_failure") {
        this.addToast(event.kind, event.message);
      }
    } else {
      this.state.gapsDropped += event.dropped;
      this.addToast("gap", `event stream dropped ${event.dropped} events`);
    }
    this.emit();
  }

  setConnection(status: "connecting" | "live" | "lost"): void {
    this.state.connection = status;
    this.emit();
  }

  private patchFromFrame(frame: Frame): void {
    // keep the cheap live fields fresh between /state polls
    const server = this.state.server;
    if (!server) return;
    server.latest = frame;
    server.relays = [...frame.relay];
    server.mode = frame.mode;
  }

  private pushObserved(frame: Frame): void {
    for (const pot of [0, 1, 2] as PotIndex[]) {
      const observed = this.state.series[pot].observed;
      const last = observed[observed.length - 1];
      if (last && last.ts >= frame.ts) continue; // poll/SSE overlap
      observed.push({ ts: frame.ts, value: zoneAverage(frame, pot) });
      const cutoff = frame.ts - SERIES_WINDOW_S;
      while (observed.length && observed[0].ts < cutoff) observed.shift();
    }
  }

  private syncForecast(server: ServerState): void {
    const latestTs = server.latest?.ts ?? 0;
    const frameSpacing = this.frameSpacing();
    for (const pot of [0, 1, 2] as PotIndex[]) {
      const vector = server.forecast[String(pot)];
      this.state.series[pot].forecast = (vector ?? []).map((value, i) => ({
        ts: latestTs + (i + 1) * frameSpacing,
        value,
      }));
    }
  }

  private frameSpacing(): number {
    const observed = this.state.series[0].observed;
    if (observed.length < 2) return 1;
    return observed[observed.length - 1].ts - observed[observed.length - 2].ts;
  }

  private addToast(kind: string, text: string): void {
    this.state.toasts.push({ id: this.nextToastId++, kind, text });
    if (this.state.toasts.length > MAX_TOASTS) this.state.toasts.shift();
  }

  dismissToast(id: number): void {
    this.state.toasts = this.state.toasts.filter((t) => t.id !== id);
    this.emit();
  }

  // -- user gestures (exactly one request per call) -----------------------------

  async selectMode(mode: ModeCode): Promise<void> {
    if (this.state.pendingMode !== null) return; // a selection is in flight
    if (this.state.server?.mode === mode) return;
    this.state.pendingMode = mode; // optimistic highlight, not the view mode
    this.emit();
    try {
      await this.client.writePin(MODE_PIN, mode);
      await this.refreshState();
    } catch (error) {
      this.state.pendingMode = null;
      this.addToast("rejected", describe(error));
      this.emit();
    }
  }

  async toggleRelay(pot: PotIndex, on: boolean): Promise<void> {
    if (this.state.pendingRelays.has(pot)) return;
    this.state.pendingRelays.add(pot);
    this.emit();
    try {
      await this.client.writePin(RELAY_PINS[pot], on ? 1 : 0);
      await this.refreshState();
    } catch (error) {
      this.addToast("rejected", describe(error));
    } finally {
      this.state.pendingRelays.delete(pot);
      this.emit();
    }
  }

  async setThreshold(pot: PotIndex, counts: number): Promise<void> {
    try {
      await this.client.writePin(THRESHOLD_PIN, pot * 10000 + counts);
      await this.refreshState();
    } catch (error) {
      this.addToast("rejected", describe(error));
      await this.refreshState(); // slider snaps back to the server value
    }
  }

  async refreshState(): Promise<void> {
    try {
      this.applyServerState(await this.client.getState());
    } catch {
      this.setConnection("lost");
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.detail;
  return error instanceof Error ? error.message : String(error);
}
