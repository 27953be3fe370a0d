"""Scenario replay: scripted telemetry streams standing in for a simulator.

A scenario is newline-delimited JSON: the first line is metadata, every
following line is a frame `{"offset_ms": N, "message": {...}}` carrying one
telemetry wire message.  Offsets are strictly increasing and start at 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass
from itertools import count
from pathlib import Path

import httpx

from .telemetry import (
    EcamMessage,
    FlightState,
    TelemetryError,
    parse_telemetry_message,
    serialize_telemetry_message,
)

log = logging.getLogger(__name__)

TELEMETRY_PATH = "/api/v1/telemetry"
LOOP_GAP_MS = 1000


class ScenarioError(Exception):
    pass


class MalformedFrame(ScenarioError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


class NonMonotonicOffsets(ScenarioError):
    pass


class TargetUnreachable(ScenarioError):
    def __init__(self, target: str, frames_sent: int, reason: str):
        self.frames_sent = frames_sent
        super().__init__(f"target {target} unreachable after {frames_sent} frames: {reason}")


@dataclass(frozen=True)
class ScenarioMeta:
    name: str
    aircraft: str
    description: str


@dataclass(frozen=True)
class ScenarioFrame:
    offset_ms: int
    state: FlightState
    ecam: tuple[EcamMessage, ...]


@dataclass(frozen=True)
class ScenarioFile:
    meta: ScenarioMeta
    frames: tuple[ScenarioFrame, ...]

    @property
    def duration_ms(self) -> int:
        return self.frames[-1].offset_ms if self.frames else 0


@dataclass(frozen=True)
class PlaySummary:
    frames_sent: int
    rejections: int
    elapsed_s: float
    iterations: int


def load_scenario(path: str | Path) -> ScenarioFile:
    """Parse and validate a scenario file; errors carry the line number."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    numbered = [(n, line) for n, line in enumerate(lines, start=1) if line.strip()]
    if not numbered:
        raise MalformedFrame(1, "file is empty")

    meta_no, meta_line = numbered[0]
    try:
        meta_obj = json.loads(meta_line)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(meta_no, f"metadata is not valid JSON: {exc}") from None
    if not isinstance(meta_obj, dict):
        raise MalformedFrame(meta_no, "metadata must be a JSON object")
    try:
        meta = ScenarioMeta(
            name=meta_obj["name"], aircraft=meta_obj["aircraft"], description=meta_obj["description"]
        )
    except KeyError as exc:
        raise MalformedFrame(meta_no, f"metadata missing key {exc.args[0]!r}") from None
    if not all(isinstance(v, str) for v in (meta.name, meta.aircraft, meta.description)):
        raise MalformedFrame(meta_no, "metadata fields must be strings")

    frames: list[ScenarioFrame] = []
    for line_no, line in numbered[1:]:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedFrame(line_no, f"not valid JSON: {exc}") from None
        if not isinstance(obj, dict) or "offset_ms" not in obj or "message" not in obj:
            raise MalformedFrame(line_no, 'frame must be {"offset_ms": N, "message": {...}}')
        offset = obj["offset_ms"]
        if isinstance(offset, bool) or not isinstance(offset, int) or offset < 0:
            raise MalformedFrame(line_no, f"offset_ms must be a non-negative integer: {offset!r}")
        if not isinstance(obj["message"], dict):
            raise MalformedFrame(line_no, "message must be an object")
        try:
            state, ecam = parse_telemetry_message(json.dumps(obj["message"]))
        except TelemetryError as exc:
            raise MalformedFrame(line_no, f"bad telemetry message: {exc}") from None
        frames.append(ScenarioFrame(offset_ms=offset, state=state, ecam=tuple(ecam)))

    if not frames:
        raise MalformedFrame(numbered[0][0], "scenario has no frames")
    if frames[0].offset_ms != 0:
        raise NonMonotonicOffsets(f"first frame must be at offset 0, got {frames[0].offset_ms}")
    for previous, current in zip(frames, frames[1:]):
        if current.offset_ms <= previous.offset_ms:
            raise NonMonotonicOffsets(
                f"offset {current.offset_ms} after {previous.offset_ms} is not increasing"
            )
    return ScenarioFile(meta=meta, frames=tuple(frames))


def play(
    scenario: ScenarioFile,
    target_url: str,
    rate: float = 1.0,
    loop: bool = False,
    client: httpx.Client | None = None,
    max_iterations: int | None = None,
) -> PlaySummary:
    """Post frames at offset/rate wall-clock spacing, in file order.

    Looping rebases each iteration's wire timestamps past the previous one
    so the server's monotonic-timestamp rule keeps accepting frames.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if max_iterations is None:
        max_iterations = 0 if loop else 1
    url = target_url.rstrip("/") + TELEMETRY_PATH
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=10.0)

    sent = 0
    rejections = 0
    iterations = 0
    start = time.monotonic()
    try:
        for iteration in count():
            if max_iterations and iteration >= max_iterations:
                break
            base_ms = iteration * (scenario.duration_ms + LOOP_GAP_MS)
            for frame in scenario.frames:
                due_s = (base_ms + frame.offset_ms) / 1000.0 / rate
                delay = start + due_s - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                state = frame.state
                if base_ms:
                    state = dataclasses.replace(state, timestamp_ms=state.timestamp_ms + base_ms)
                body = serialize_telemetry_message(state, list(frame.ecam))
                try:
                    response = client.post(
                        url, content=body, headers={"content-type": "application/json"}
                    )
                except httpx.TransportError as exc:
                    raise TargetUnreachable(target_url, sent, str(exc)) from None
                sent += 1
                if response.status_code >= 400:
                    rejections += 1
                    log.warning(
                        "frame at offset %d rejected (%d): %s",
                        frame.offset_ms, response.status_code, response.text[:120],
                    )
            iterations += 1
    finally:
        if own_client:
            client.close()
    return PlaySummary(
        frames_sent=sent, rejections=rejections,
        elapsed_s=time.monotonic() - start, iterations=iterations,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="leraat-sim", description="Replay a telemetry scenario")
    parser.add_argument("--scenario", required=True, help="newline-delimited JSON scenario file")
    parser.add_argument("--target", required=True, help="relay base URL, e.g. http://127.0.0.1:8000")
    parser.add_argument("--rate", type=float, default=1.0, help="playback speed multiplier")
    parser.add_argument("--loop", action="store_true", help="replay forever, rebasing timestamps")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"scenario: {scenario.meta.name} ({scenario.meta.aircraft}), "
          f"{len(scenario.frames)} frames over {scenario.duration_ms / 1000.0:.1f} s")
    try:
        summary = play(scenario, args.target, rate=args.rate, loop=args.loop)
    except TargetUnreachable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\ninterrupted")
        return 130
    print(
        f"sent {summary.frames_sent} frames ({summary.rejections} rejected) "
        f"in {summary.elapsed_s:.2f} s over {summary.iterations} iteration(s)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
