// DOM bootstrap: renders the store and forwards gestures to it. All behavior
// lives in store.ts / api.ts / events.ts so it stays testable without a DOM.

import { GatewayClient } from "./api.js";
import { MoistureChart } from "./chart.js";
import { EventSourceLike, EventStream } from "./events.js";
import { DashboardStore } from "./store.js";
import { MODE_NAMES, ModeCode, PotIndex } from "./types.js";

const BASE_URL = "";
const TOKEN = localStorage.getItem("driptwin_token") ?? "local-dev-token";
const STATE_POLL_MS = 2000;

const store = new DashboardStore(new GatewayClient(BASE_URL, TOKEN));
const chart = new MoistureChart(document.getElementById("chart") as HTMLCanvasElement);

const el = (id: string) => document.getElementById(id) as HTMLElement;

function render(): void {
  const { server, connection, pendingMode, toasts, feed } = store.state;

  const banner = el("banner");
  banner.className = `banner ${connection}`;
  banner.textContent =
    connection === "live" ? "live" : connection === "lost" ? "connection lost - read-only, retrying" : "connecting";

  if (server) {
    el("gauge-temp").textContent = server.latest?.temp?.toString() ?? "--";
    el("gauge-hum").textContent = server.latest?.hum?.toString() ?? "--";
    el("gauge-flow").textContent = server.latest ? server.latest.flow.toFixed(1) : "--";
    el("gauge-rain").textContent = server.latest ? (server.latest.rain ? "wet" : "dry") : "--";
    el("health").textContent = server.failsafe
      ? "SENSOR FAILURE - irrigation halted"
      : Object.values(server.sensor_health).every(Boolean)
        ? "sensors healthy"
        : "sensor degraded";
    el("health").className = server.failsafe ? "health bad" : "health ok";
  }

  for (const mode of [1, 2, 3] as ModeCode[]) {
    const button = el(`mode-${mode}`) as HTMLButtonElement;
    button.classList.toggle("active", server?.mode === mode);
    button.classList.toggle("pending", pendingMode === mode);
    button.disabled = connection === "lost" || pendingMode !== null;
  }

  const togglesEnabled = store.togglesEnabled();
  for (const pot of [0, 1, 2] as PotIndex[]) {
    const toggle = el(`relay-${pot}`) as HTMLInputElement;
    toggle.checked = (server?.relays[pot] ?? 0) === 1;
    toggle.disabled = !togglesEnabled || store.state.pendingRelays.has(pot);
    el(`relay-state-${pot}`).textContent = toggle.checked ? "open" : "closed";
    const slider = el(`threshold-${pot}`) as HTMLInputElement;
    if (document.activeElement !== slider && server) {
      slider.value = String(server.thresholds[pot]);
    }
    el(`threshold-value-${pot}`).textContent = server ? String(server.thresholds[pot]) : "--";
    const zone = server?.latest ? (server.latest.soil[2 * pot] + server.latest.soil[2 * pot + 1]) / 2 : null;
    el(`zone-${pot}`).textContent = zone === null ? "--" : zone.toFixed(0);
  }
  el("mode-label").textContent = server ? MODE_NAMES[server.mode] : "--";

  const toastBox = el("toasts");
  toastBox.replaceChildren(
    ...toasts.map((toast) => {
      const node = document.createElement("div");
      node.className = `toast ${toast.kind}`;
      node.textContent = toast.text;
      node.onclick = () => store.dismissToast(toast.id);
      return node;
    }),
  );

  el("feed").replaceChildren(
    ...feed.map((entry) => {
      const node = document.createElement("li");
      node.className = entry.kind;
      node.textContent = `[${entry.ts}s] ${entry.message}`;
      return node;
    }),
  );

  chart.render(store.state.series, server ? server.thresholds : []);
}

function bind(): void {
  for (const mode of [1, 2, 3] as ModeCode[]) {
    el(`mode-${mode}`).addEventListener("click", () => void store.selectMode(mode));
  }
  for (const pot of [0, 1, 2] as PotIndex[]) {
    el(`relay-${pot}`).addEventListener("change", (ev) => {
      const on = (ev.target as HTMLInputElement).checked;
      void store.toggleRelay(pot, on);
    });
    el(`threshold-${pot}`).addEventListener("change", (ev) => {
      const counts = Number((ev.target as HTMLInputElement).value);
      void store.setThreshold(pot, counts);
    });
  }
}

store.subscribe(render);
bind();

const stream = new EventStream(
  `${BASE_URL}/events`,
  {
    onEvent: (event) => store.applyEvent(event),
    onStatus: (status) => store.setConnection(status),
  },
  (url) => {
    // adapt the DOM EventSource to the injectable interface
    const source = new EventSource(url);
    const like: EventSourceLike = {
      onmessage: null,
      onerror: null,
      onopen: null,
      close: () => source.close(),
    };
    source.onmessage = (ev) => like.onmessage?.({ data: String(ev.data) });
    source.onerror = (ev) => like.onerror?.(ev);
    source.onopen = (ev) => like.onopen?.(ev);
    return like;
  },
);
stream.start();

void store.refreshState();
setInterval(() => void store.refreshState(), STATE_POLL_MS);
