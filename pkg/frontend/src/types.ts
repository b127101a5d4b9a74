// Payload shapes of the gateway HTTP API (docs/api.md in the backend repo).

export type ModeCode = 1 | 2 | 3; // AI, AUTO, MANUAL

export const MODE_NAMES: Record<ModeCode, string> = { 1: "AI", 2: "AUTO", 3: "MANUAL" };

export type PotIndex = 0 | 1 | 2;

export const RELAY_PINS: Record<PotIndex, string> = { 0: "V5", 1: "V6", 2: "V7" };
export const THRESHOLD_PIN = "V8";
export const MODE_PIN = "V9";

/** One telemetry frame, exactly as the wire protocol encodes it. */
export interface Frame {
  ts: number;
  temp: number | null;
  hum: number | null;
  rain: 0 | 1;
  flow: number;
  soil: number[];
  relay: number[];
  mode: ModeCode;
}

export interface ServerState {
  cycle: number;
  mode: ModeCode;
  relays: number[];
  thresholds: number[];
  latest: Frame | null;
  sensor_health: Record<string, boolean>;
  connected: boolean;
  plan: Record<string, { irrigate: boolean; duration_s: number }> | null;
  forecast: Record<string, number[] | null>;
  failsafe: boolean;
}

export type GatewayEvent =
  | { seq: number; type: "snapshot"; frame: Frame }
  | {
      seq: number;
      type: "notification";
      ts: number;
      kind: string;
      pot: number | null;
      message: string;
    }
  | { seq: number; type: "gap"; dropped: number };

export function zoneAverage(frame: Frame, pot: PotIndex): number {
  return (frame.soil[2 * pot] + frame.soil[2 * pot + 1]) / 2;
}
