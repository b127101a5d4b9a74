"""HTTP service over the running loop: state snapshots, telemetry history,
virtual-pin writes, and a live server-sent event stream.

The pin vocabulary of the mobile app is kept as the external API: V5..V7 are
the three relay channels, V8 carries a threshold write (value = pot*10000 +
counts), V9 selects the mode. Writes require the static bearer token; reads
are open. Payload schemas are documented in docs/api.md.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse, StreamingResponse

from .controller import RejectedCommand
from .core import Notification, SensorSnapshot
from .engine import ClosedLoop
from .protocol import frame_dict

logger = logging.getLogger(__name__)

PIN_RELAYS = {"V5": 0, "V6": 1, "V7": 2}
PIN_THRESHOLD = "V8"
PIN_MODE = "V9"
KNOWN_PINS = tuple(PIN_RELAYS) + (PIN_THRESHOLD, PIN_MODE)


class Subscription:
    """One consumer's bounded event queue; overflow drops oldest and marks a gap."""

    def __init__(self, hub: "EventHub", maxlen: int):
        self._hub = hub
        self._events: deque[dict] = deque(maxlen=maxlen)
        self._dropped = 0
        self._cond = threading.Condition()
        self.closed = False

    def _push(self, event: dict) -> None:
        with self._cond:
            if len(self._events) == self._events.maxlen:
                self._dropped += 1
            self._events.append(event)
            self._cond.notify_all()

    def get(self, timeout: Optional[float] = None) -> Optional[dict]:
        """Next event, a gap marker after overflow, or None on timeout."""
        with self._cond:
            if not self._events and not self._dropped:
                self._cond.wait(timeout=timeout)
            if self._dropped:
                count, self._dropped = self._dropped, 0
                return {"type": "gap", "dropped": count}
            if self._events:
                return self._events.popleft()
            return None

    def close(self) -> None:
        self.closed = True
        self._hub.unsubscribe(self)


class EventHub:
    """Fan-out of controller-ordered events to any number of live consumers."""

    def __init__(self, buffer_size: int = 256):
        self.buffer_size = buffer_size
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._seq = 0

    def subscribe(self) -> Subscription:
        sub = Subscription(self, self.buffer_size)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, event: dict) -> dict:
        with self._lock:
            self._seq += 1
            event = {"seq": self._seq, **event}
            subs = list(self._subs)
        for sub in subs:
            sub._push(event)
        return event

    def publish_snapshot(self, snap: SensorSnapshot) -> None:
        self.publish({"type": "snapshot", "frame": frame_dict(snap)})

    def publish_notification(self, note: Notification) -> None:
        self.publish({"type": "notification", **note.to_dict()})


@dataclass(frozen=True)
class StateView:
    """Immutable picture of one completed control cycle."""

    cycle: int
    mode: int
    relays: tuple[int, ...]
    thresholds: tuple[int, ...]
    latest: Optional[dict]
    sensor_health: dict
    connected: bool
    plan: Optional[dict]
    forecast: dict
    failsafe: bool

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "mode": self.mode,
            "relays": list(self.relays),
            "thresholds": list(self.thresholds),
            "latest": self.latest,
            "sensor_health": dict(self.sensor_health),
            "connected": self.connected,
            "plan": self.plan,
            "forecast": {str(k): v for k, v in self.forecast.items()},
            "failsafe": self.failsafe,
        }


class GatewayRuntime:
    """Owns the loop, serializes writes, publishes state and events.

    All mutation happens under one lock (HTTP writes and the tick thread), so
    a published StateView is always internally consistent.
    """

    def __init__(self, loop: ClosedLoop, event_buffer: int = 256, time_scale: float = 1.0):
        self.loop = loop
        self.hub = EventHub(buffer_size=event_buffer)
        self.time_scale = time_scale
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

        loop.controller.subscribe(self.hub.publish_notification)
        loop.on_frame = self._on_frame
        self._state: StateView = self._build_state()

    # -- state publication ---------------------------------------------------

    def _on_frame(self, snap: SensorSnapshot) -> None:
        self.hub.publish_snapshot(snap)
        self._state = self._build_state()

    def _build_state(self) -> StateView:
        ctrl = self.loop.controller
        latest = self.loop.log.last()
        forecast = {
            pot: (None if vec is None else [float(v) for v in vec])
            for pot, vec in ctrl.latest_forecasts.items()
        }
        return StateView(
            cycle=ctrl.cycle,
            mode=int(ctrl.current_mode),
            relays=tuple(int(r) for r in self.loop.firmware.state.relay),
            thresholds=tuple(ctrl.thresholds),
            latest=None if latest is None else frame_dict(latest),
            sensor_health=dict(ctrl.sensor_health),
            connected=ctrl.connected,
            plan=None if ctrl.plan is None else ctrl.plan.to_dict(),
            forecast=forecast,
            failsafe=ctrl.failsafe_active,
        )

    def state(self) -> StateView:
        return self._state

    # -- writes ----------------------------------------------------------------

    def write_pin(self, pin: str, value: int) -> dict:
        """Apply one virtual-pin write; raises for bad pins/values/mode guards."""
        with self._lock:
            ctrl = self.loop.controller
            if pin == PIN_MODE:
                mode = ctrl.set_mode(value)
                applied = {"mode": int(mode)}
            elif pin == PIN_THRESHOLD:
                pot, counts = divmod(value, 10000)
                ctrl.set_threshold(pot, counts)
                applied = {"pot": pot, "threshold": counts}
            elif pin in PIN_RELAYS:
                if value not in (0, 1):
                    raise ValueError(f"relay pin value must be 0 or 1, got {value}")
                pot = PIN_RELAYS[pin]
                ctrl.request_manual_relay(pot, value == 1)
                applied = {"pot": pot, "relay": value}
            else:
                raise KeyError(pin)
            self._state = self._build_state()
            return applied

    def set_connectivity(self, connected: bool) -> None:
        with self._lock:
            self.loop.controller.set_connectivity(connected)
            self._state = self._build_state()

    # -- background ticking ------------------------------------------------------

    def tick_once(self) -> None:
        with self._lock:
            self.loop.tick()

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._run, name="driptwin-loop", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        dt = self.loop.cfg.dt
        while not self._stop.is_set():
            started = time.monotonic()
            self.tick_once()
            budget = dt / self.time_scale if self.time_scale > 0 else 0.0
            remaining = budget - (time.monotonic() - started)
            if remaining > 0:
                self._stop.wait(remaining)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        self.loop.log.close()


def build_app(runtime: GatewayRuntime, token: str,
              ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="driptwin gateway", docs_url=None, redoc_url=None)

    def unauthorized() -> JSONResponse:
        return JSONResponse({"detail": "missing or invalid bearer token"}, status_code=401)

    def check_auth(request: Request) -> bool:
        header = request.headers.get("authorization", "")
        return header == f"Bearer {token}"

    @app.get("/state")
    def get_state() -> JSONResponse:
        return JSONResponse(runtime.state().to_dict())

    @app.get("/telemetry")
    def get_telemetry(request: Request) -> JSONResponse:
        params = request.query_params
        try:
            ts_from = int(params["from"]) if "from" in params else None
            ts_to = int(params["to"]) if "to" in params else None
        except ValueError:
            return JSONResponse({"detail": "from/to must be integer timestamps"}, status_code=422)
        frames = [frame_dict(s) for s in runtime.loop.log.range(ts_from, ts_to)]
        return JSONResponse({"frames": frames})

    @app.post("/pin/{pin}")
    async def post_pin(pin: str, request: Request) -> JSONResponse:
        if not check_auth(request):
            return unauthorized()
        if pin not in KNOWN_PINS:
            return JSONResponse({"detail": f"unknown pin {pin}"}, status_code=404)
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"detail": "body must be JSON"}, status_code=422)
        if isinstance(body, dict) and "value" in body:
            body = body["value"]
        if isinstance(body, bool) or not isinstance(body, int):
            return JSONResponse({"detail": "value must be an integer"}, status_code=422)
        try:
            applied = runtime.write_pin(pin, body)
        except RejectedCommand as e:
            return JSONResponse({"detail": str(e)}, status_code=409)
        except ValueError as e:
            return JSONResponse({"detail": str(e)}, status_code=422)
        return JSONResponse({"ok": True, "pin": pin, "applied": applied})

    @app.get("/events")
    def get_events(limit: int = 0) -> StreamingResponse:
        """Server-sent events; `limit` > 0 ends the stream after that many events
        (handy for curl and tests), otherwise it runs until the client leaves."""
        sub = runtime.hub.subscribe()

        def stream():
            sent = 0
            try:
                while limit <= 0 or sent < limit:
                    event = sub.get(timeout=1.0)
                    if event is None:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(event, separators=(',', ':'))}\n\n"
                    sent += 1
            finally:
                sub.close()

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir is not None and (ui_dir / "index.html").exists():
        # same-origin hosting of the dashboard avoids any CORS setup
        @app.get("/")
        def root() -> RedirectResponse:
            return RedirectResponse("/ui/index.html")

        @app.get("/ui/{path:path}")
        def ui(path: str) -> FileResponse:
            target = (ui_dir / path).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                return JSONResponse({"detail": "not found"}, status_code=404)
            return FileResponse(target)

    return app
