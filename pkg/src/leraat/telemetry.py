"""Flight-data model, wire parsing, latest-state cache, and alert edge detection.

The simulator (or the scenario replayer standing in for it) delivers one JSON
object per message, either over HTTP POST or newline-delimited on a byte
stream.  This module validates those messages into :class:`FlightState`
snapshots, keeps the most recent accepted snapshot, and detects rising edges
of the master warning / master caution flags.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from enum import Enum


class TelemetryError(Exception):
    """Base class for telemetry wire-format errors."""


class MalformedMessage(TelemetryError):
    """Message is not a syntactically valid telemetry record."""


class InvalidField(TelemetryError):
    """A field value is out of range or of the wrong type."""

    def __init__(self, field_name: str, reason: str = ""):
        self.field_name = field_name
        super().__init__(f"invalid field {field_name!r}" + (f": {reason}" if reason else ""))


class EcamSeverity(Enum):
    WARNING = "WARNING"
    CAUTION = "CAUTION"
    MEMO = "MEMO"


class TriggerKind(Enum):
    MASTER_WARNING = "MASTER_WARNING"
    MASTER_CAUTION = "MASTER_CAUTION"


# Top-level wire keys, in serialization order.  `ecam` is handled separately.
WIRE_FIELDS = (
    "timestamp_ms",
    "latitude_deg",
    "longitude_deg",
    "altitude_ft",
    "indicated_airspeed_kt",
    "heading_deg",
    "vertical_speed_fpm",
    "fuel_left_kg",
    "fuel_right_kg",
    "autopilot_mode",
    "autothrottle_mode",
    "master_warning",
    "master_caution",
)


@dataclass(frozen=True)
class EcamMessage:
    """One severity-tagged crew-alerting message."""

    severity: EcamSeverity
    text: str
    timestamp_ms: int

    def __post_init__(self):
        if not self.text:
            raise InvalidField("ecam.text", "must be non-empty")


@dataclass(frozen=True)
class FlightState:
    """One snapshot of aircraft telemetry plus master warning/caution flags.

    Unknown wire keys are carried through untouched in ``extras`` so richer
    simulators are not rejected.
    """

    timestamp_ms: int
    latitude_deg: float
    longitude_deg: float
    altitude_ft: float
    indicated_airspeed_kt: float
    heading_deg: float
    vertical_speed_fpm: float
    fuel_left_kg: float
    fuel_right_kg: float
    autopilot_mode: str
    autothrottle_mode: str
    master_warning: bool
    master_caution: bool
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise InvalidField("latitude_deg", f"{self.latitude_deg} outside [-90, 90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise InvalidField("longitude_deg", f"{self.longitude_deg} outside [-180, 180]")
        if not 0.0 <= self.heading_deg < 360.0:
            raise InvalidField("heading_deg", f"{self.heading_deg} outside [0, 360)")
        if self.fuel_left_kg < 0:
            raise InvalidField("fuel_left_kg", "must be >= 0")
        if self.fuel_right_kg < 0:
            raise InvalidField("fuel_right_kg", "must be >= 0")


@dataclass(frozen=True)
class TriggerEvent:
    """A master warning/caution rising edge with the snapshot that raised it."""

    kind: TriggerKind
    at: int
    snapshot: FlightState
    ecam: tuple[EcamMessage, ...]


def _require_number(obj: dict, key: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidField(key, "must be a number")
    return float(value)


def _require_int(obj: dict, key: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidField(key, "must be an integer")
    return value


def _require_bool(obj: dict, key: str) -> bool:
    value = obj[key]
    if not isinstance(value, bool):
        raise InvalidField(key, "must be a boolean")
    return value


def _require_str(obj: dict, key: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise InvalidField(key, "must be a string")
    return value


def _parse_ecam_entry(entry, index: int) -> EcamMessage:
    if not isinstance(entry, dict):
        raise InvalidField(f"ecam[{index}]", "must be an object")
    try:
        severity_raw = entry["severity"]
        text = entry["text"]
        ts = entry["timestamp_ms"]
    except KeyError as exc:
        raise MalformedMessage(f"ecam[{index}] missing key {exc.args[0]!r}") from None
    try:
        severity = EcamSeverity(severity_raw)
    except ValueError:
        raise InvalidField(f"ecam[{index}].severity", f"unknown severity {severity_raw!r}") from None
    if not isinstance(text, str) or not text:
        raise InvalidField(f"ecam[{index}].text", "must be a non-empty string")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise InvalidField(f"ecam[{index}].timestamp_ms", "must be an integer")
    return EcamMessage(severity=severity, text=text, timestamp_ms=ts)


def parse_telemetry_message(raw: bytes | str) -> tuple[FlightState, list[EcamMessage]]:
    """Parse one wire message into a validated snapshot and its ECAM list.

    Raises MalformedMessage on syntax problems (bad UTF-8/JSON, missing keys)
    and InvalidField, naming the field, on out-of-range or mistyped values.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessage(f"not valid UTF-8: {exc}") from None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedMessage("top-level value must be an object")

    for key in WIRE_FIELDS + ("ecam",):
        if key not in obj:
            raise MalformedMessage(f"missing key {key!r}")

    ecam_raw = obj["ecam"]
    if not isinstance(ecam_raw, list):
        raise InvalidField("ecam", "must be an array")
    ecam = [_parse_ecam_entry(entry, i) for i, entry in enumerate(ecam_raw)]

    extras = {k: v for k, v in obj.items() if k not in WIRE_FIELDS and k != "ecam"}
    state = FlightState(
        timestamp_ms=_require_int(obj, "timestamp_ms"),
        latitude_deg=_require_number(obj, "latitude_deg"),
        longitude_deg=_require_number(obj, "longitude_deg"),
        altitude_ft=_require_number(obj, "altitude_ft"),
        indicated_airspeed_kt=_require_number(obj, "indicated_airspeed_kt"),
        heading_deg=_require_number(obj, "heading_deg"),
        vertical_speed_fpm=_require_number(obj, "vertical_speed_fpm"),
        fuel_left_kg=_require_number(obj, "fuel_left_kg"),
        fuel_right_kg=_require_number(obj, "fuel_right_kg"),
        autopilot_mode=_require_str(obj, "autopilot_mode"),
        autothrottle_mode=_require_str(obj, "autothrottle_mode"),
        master_warning=_require_bool(obj, "master_warning"),
        master_caution=_require_bool(obj, "master_caution"),
        extras=extras,
    )
    return state, ecam


def serialize_telemetry_message(state: FlightState, ecam: list[EcamMessage]) -> bytes:
    """Render a snapshot back into the wire format (inverse of parse)."""
    obj = {key: getattr(state, key) for key in WIRE_FIELDS}
    obj.update(state.extras)
    obj["ecam"] = [
        {"severity": m.severity.value, "text": m.text, "timestamp_ms": m.timestamp_ms}
        for m in ecam
    ]
    return json.dumps(obj).encode("utf-8")


def detect_trigger(
    prev: FlightState | None,
    curr: FlightState,
    ecam: list[EcamMessage],
) -> TriggerEvent | None:
    """Return a trigger event iff a master flag rises false -> true.

    An absent previous snapshot counts as both flags false.  When both flags
    rise in the same snapshot, the warning wins (warnings are the more urgent
    class); steady-state true flags never re-trigger.
    """
    prev_warning = prev.master_warning if prev is not None else False
    prev_caution = prev.master_caution if prev is not None else False
    kind = None
    if curr.master_warning and not prev_warning:
        kind = TriggerKind.MASTER_WARNING
    elif curr.master_caution and not prev_caution:
        kind = TriggerKind.MASTER_CAUTION
    if kind is None:
        return None
    return TriggerEvent(kind=kind, at=curr.timestamp_ms, snapshot=curr, ecam=tuple(ecam))


class TelemetryStore:
    """Last-write-wins cache of the most recent accepted snapshot.

    One writer, many readers: reads return consistent (state, ecam) pairs.
    Snapshots with a timestamp at or below the stored one are rejected, not
    reordered -- this is a cache, not a time-series store.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._latest: tuple[FlightState, tuple[EcamMessage, ...]] | None = None

    def ingest(self, state: FlightState, ecam: list[EcamMessage]) -> bool:
        """Store the snapshot; returns False (store unchanged) if stale."""
        accepted, _ = self.advance(state, ecam)
        return accepted

    def advance(
        self, state: FlightState, ecam: list[EcamMessage]
    ) -> tuple[bool, FlightState | None]:
        """Atomically ingest and return (accepted, previous state)."""
        with self._lock:
            prev = self._latest[0] if self._latest is not None else None
            if prev is not None and state.timestamp_ms <= prev.timestamp_ms:
                return False, prev
            self._latest = (state, tuple(ecam))
            return True, prev

    def latest(self) -> tuple[FlightState, tuple[EcamMessage, ...]] | None:
        """Most recently accepted (state, ecam) pair, or None before first ingest."""
        with self._lock:
            return self._latest
