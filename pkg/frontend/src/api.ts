// Thin typed client for the gateway; fetch is injectable so tests can fake the
// transport without a browser.

import type { Frame, ServerState } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
  }
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async getState(): Promise<ServerState> {
    const response = await this.fetchFn(`${this.baseUrl}/state`);
    if (!response.ok) {
      throw new ApiError(response.status, `state request failed (${response.status})`);
    }
    return (await response.json()) as ServerState;
  }

  async getTelemetry(from?: number, to?: number): Promise<Frame[]> {
    const params = new URLSearchParams();
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    const qs = params.toString();
    const response = await this.fetchFn(`${this.baseUrl}/telemetry${qs ? `?${qs}` : ""}`);
    if (!response.ok) {
      throw new ApiError(response.status, `telemetry request failed (${response.status})`);
    }
    const body = (await response.json()) as { frames: Frame[] };
    return body.frames;
  }

  /** Write one virtual pin; rejections surface as ApiError with the server's reason. */
  async writePin(pin: string, value: number): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/pin/${pin}`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${this.token}`,
      },
      body: JSON.stringify(value),
    });
    if (!response.ok) {
      let detail = `pin write failed (${response.status})`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // keep the generic message for non-JSON errors
      }
      throw new ApiError(response.status, detail);
    }
  }
}
