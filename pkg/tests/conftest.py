"""Shared fixtures: sample states, wire messages, and a live-server helper."""

from __future__ import annotations

import json
import threading
import time

import httpx
import pytest
import uvicorn

from leraat import DATA_DIR
from leraat.config import load_config
from leraat.telemetry import EcamMessage, EcamSeverity, FlightState


def make_flight_state(**overrides) -> FlightState:
    base = dict(
        timestamp_ms=1755272400000,
        latitude_deg=47.4502,
        longitude_deg=-122.3088,
        altitude_ft=32000.0,
        indicated_airspeed_kt=280.0,
        heading_deg=292.0,
        vertical_speed_fpm=0.0,
        fuel_left_kg=5400.0,
        fuel_right_kg=6300.0,
        autopilot_mode="CMD",
        autothrottle_mode="SPEED",
        master_warning=False,
        master_caution=False,
    )
    base.update(overrides)
    return FlightState(**base)


def make_wire_message(**overrides) -> dict:
    msg = dict(
        timestamp_ms=1755272400000,
        latitude_deg=47.4502,
        longitude_deg=-122.3088,
        altitude_ft=32000.0,
        indicated_airspeed_kt=280.0,
        heading_deg=292.0,
        vertical_speed_fpm=0.0,
        fuel_left_kg=5400.0,
        fuel_right_kg=6300.0,
        autopilot_mode="CMD",
        autothrottle_mode="SPEED",
        master_warning=False,
        master_caution=False,
        ecam=[],
    )
    msg.update(overrides)
    return msg


def make_ecam(text="HYD G SYS LO PR", severity=EcamSeverity.WARNING, ts=1755272400000) -> EcamMessage:
    return EcamMessage(severity=severity, text=text, timestamp_ms=ts)


@pytest.fixture
def flight_state():
    return make_flight_state()


class LiveServer:
    """uvicorn on an ephemeral port in a daemon thread."""

    def __init__(self, app):
        self._server = uvicorn.Server(
            uvicorn.Config(
                app, host="127.0.0.1", port=0, log_level="warning",
                timeout_graceful_shutdown=2,
            )
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self.base_url = ""

    def start(self) -> "LiveServer":
        self._thread.start()
        deadline = time.monotonic() + 10.0
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 10 s")
            time.sleep(0.01)
        sock = self._server.servers[0].sockets[0]
        host, port = sock.getsockname()[:2]
        self.base_url = f"http://{host}:{port}"
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5.0)


class SseCollector:
    """Background reader of /api/v1/stream frames."""

    def __init__(self, base_url: str):
        self._base_url = base_url
        self.frames: list[dict] = []
        self._stop = threading.Event()
        self._client = httpx.Client(timeout=httpx.Timeout(5.0, read=30.0))
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        try:
            with self._client.stream("GET", self._base_url + "/api/v1/stream") as response:
                for line in response.iter_lines():
                    if self._stop.is_set():
                        break
                    if line.startswith("data: "):
                        self.frames.append(json.loads(line[len("data: "):]))
        except (httpx.HTTPError, RuntimeError):
            pass

    def start(self) -> "SseCollector":
        self._thread.start()
        return self

    def wait_for(self, predicate, timeout_s: float = 5.0) -> dict | None:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            for frame in list(self.frames):
                if predicate(frame):
                    return frame
            time.sleep(0.01)
        return None

    def stop(self) -> None:
        # Closing the client severs the stream so the server can shut down.
        self._stop.set()
        try:
            self._client.close()
        except Exception:
            pass
        self._thread.join(timeout=5.0)


def relay_config(tmp_path, **overrides):
    """A ServerConfig wired to the packaged fixtures and a mock backend."""
    settings = {
        "paths": {
            "corpus_dir": str(DATA_DIR / "corpus"),
            "index_file": str(tmp_path / "manuals.index.json"),
            "airport_db": str(DATA_DIR / "airports_sample.csv"),
            "metar_file": str(DATA_DIR / "metars_sample.txt"),
        },
        "llm": {"backend": "mock"},
    }
    for section, values in overrides.items():
        settings.setdefault(section, {}).update(values)
    import yaml

    config_file = tmp_path / "config.yaml"
    config_file.write_text(yaml.safe_dump(settings), encoding="utf-8")
    return load_config(config_file, environ={})


@pytest.fixture
def live_relay(tmp_path):
    """A full relay (mock backend, packaged data) on a real port."""
    from leraat.relay import create_app, load_resources

    relay = load_resources(relay_config(tmp_path))
    server = LiveServer(create_app(relay)).start()
    try:
        yield server, relay
    finally:
        server.stop()
