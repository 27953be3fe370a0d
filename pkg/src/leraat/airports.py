"""Airport database, great-circle geodesy, alternate selection, METAR decoding.

The database is a flat CSV (one row per runway, airport fields repeated).
Distances use the haversine formula on a sphere; alternates are ranked by
distance only, with runway length as a filter, so the downstream advisor
sees plain facts and weighs them itself.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Protocol

import httpx

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
KM_PER_NM = 1.852
METERS_PER_SM = 1609.344
KT_PER_MPS = 1.943844
HPA_PER_INHG = 33.8638866667

DEFAULT_RADIUS_NM = 200.0
DEFAULT_MIN_RUNWAY_FT = 5000
DEFAULT_MAX_RESULTS = 5

CSV_COLUMNS = (
    "ident", "name", "latitude_deg", "longitude_deg", "elevation_ft",
    "runway_designators", "runway_length_ft", "runway_width_ft", "surface",
)


class AirportError(Exception):
    """Base class for airport database and weather errors."""


class MalformedRow(AirportError):
    def __init__(self, row_number: int, reason: str):
        self.row_number = row_number
        super().__init__(f"row {row_number}: {reason}")


class DuplicateIdent(AirportError):
    pass


class UnrecognizedStation(AirportError):
    pass


@dataclass(frozen=True)
class Runway:
    designators: str
    length_ft: int
    width_ft: int
    surface: str

    def __post_init__(self):
        if self.length_ft <= 0:
            raise ValueError("runway length must be positive")
        if self.width_ft <= 0:
            raise ValueError("runway width must be positive")


@dataclass(frozen=True)
class Airport:
    ident: str
    name: str
    latitude_deg: float
    longitude_deg: float
    elevation_ft: int
    runways: tuple[Runway, ...] = ()

    @property
    def longest_runway_ft(self) -> int:
        return max((r.length_ft for r in self.runways), default=0)


@dataclass(frozen=True)
class CloudLayer:
    cover: str
    base_ft: int | None


@dataclass(frozen=True)
class Metar:
    """Decoded METAR; raw text is always retained and unknown groups land in remarks."""

    station: str
    raw: str
    observed_day: int | None = None
    observed_hour: int | None = None
    observed_minute: int | None = None
    auto: bool = False
    corrected: bool = False
    wind_dir_deg: int | str | None = None
    wind_speed_kt: int | None = None
    gust_kt: int | None = None
    wind_var: tuple[int, int] | None = None
    visibility_sm: float | None = None
    layers: tuple[CloudLayer, ...] = ()
    ceiling_ft: int | None = None
    temperature_c: int | None = None
    dewpoint_c: int | None = None
    altimeter_inhg: float | None = None
    remarks: str = ""
    groups: tuple[str, ...] = ()


@dataclass(frozen=True)
class AlternateCandidate:
    airport: Airport
    distance_nm: float
    bearing_deg: float
    longest_runway_ft: int
    metar: Metar | None = None


@dataclass
class AirportDb:
    """Immutable-after-load mapping of ICAO ident to Airport."""

    airports: dict[str, Airport] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.airports)

    def __getitem__(self, ident: str) -> Airport:
        return self.airports[ident]

    def __contains__(self, ident: str) -> bool:
        return ident in self.airports

    def __iter__(self) -> Iterator[Airport]:
        return iter(self.airports.values())

    def get(self, ident: str) -> Airport | None:
        return self.airports.get(ident)


def _parse_float(value: str, name: str, row_number: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise MalformedRow(row_number, f"{name} is not a number: {value!r}") from None


def _parse_int(value: str, name: str, row_number: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise MalformedRow(row_number, f"{name} is not an integer: {value!r}") from None


def load_airport_db(path: str | Path) -> AirportDb:
    """Load the runway-per-row CSV into a database keyed by ident.

    Airport-level fields must agree across rows of the same ident; a
    conflicting repeat (or a repeated runway designator) raises
    DuplicateIdent.  Airports with no runway columns are retained but
    logged, since they can never qualify as alternates.
    """
    path = Path(path)
    airports: dict[str, Airport] = {}
    seen_designators: dict[str, set[str]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "missing header row") from None
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise MalformedRow(1, f"header must be {','.join(CSV_COLUMNS)}")
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(CSV_COLUMNS):
                raise MalformedRow(row_number, f"expected {len(CSV_COLUMNS)} columns, got {len(row)}")
            ident, name, lat_s, lon_s, elev_s, desig, length_s, width_s, surface = (
                cell.strip() for cell in row
            )
            if len(ident) != 4 or not ident.isalnum():
                raise MalformedRow(row_number, f"ident must be 4 alphanumerics: {ident!r}")
            latitude = _parse_float(lat_s, "latitude_deg", row_number)
            longitude = _parse_float(lon_s, "longitude_deg", row_number)
            if not -90.0 <= latitude <= 90.0:
                raise MalformedRow(row_number, f"latitude_deg out of range: {latitude}")
            if not -180.0 <= longitude <= 180.0:
                raise MalformedRow(row_number, f"longitude_deg out of range: {longitude}")
            elevation = _parse_int(elev_s, "elevation_ft", row_number)

            runway: Runway | None = None
            if desig or length_s or width_s or surface:
                length = _parse_int(length_s, "runway_length_ft", row_number)
                width = _parse_int(width_s, "runway_width_ft", row_number)
                if length <= 0:
                    raise MalformedRow(row_number, f"runway_length_ft must be positive: {length}")
                if width <= 0:
                    raise MalformedRow(row_number, f"runway_width_ft must be positive: {width}")
                if not desig:
                    raise MalformedRow(row_number, "runway_designators missing")
                runway = Runway(designators=desig, length_ft=length, width_ft=width, surface=surface)

            existing = airports.get(ident)
            if existing is None:
                airports[ident] = Airport(
                    ident=ident, name=name, latitude_deg=latitude, longitude_deg=longitude,
                    elevation_ft=elevation, runways=(runway,) if runway else (),
                )
                seen_designators[ident] = {runway.designators} if runway else set()
            else:
                same_airport = (
                    existing.name == name
                    and existing.latitude_deg == latitude
                    and existing.longitude_deg == longitude
                    and existing.elevation_ft == elevation
                )
                if not same_airport:
                    raise DuplicateIdent(f"ident {ident} repeated with conflicting airport fields")
                if runway is None:
                    raise DuplicateIdent(f"ident {ident} repeated without a new runway")
                if runway.designators in seen_designators[ident]:
                    raise DuplicateIdent(f"ident {ident} repeats runway {runway.designators}")
                seen_designators[ident].add(runway.designators)
                airports[ident] = replace(existing, runways=existing.runways + (runway,))

    for airport in airports.values():
        if not airport.runways:
            log.warning("airport %s loaded with zero runways", airport.ident)
    return AirportDb(airports=airports)


def great_circle_nm(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    """Haversine distance in nautical miles and initial bearing in [0, 360).

    Sphere radius 6371.0 km, 1 nm = 1.852 km.
    """
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    distance_km = 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    bearing = math.degrees(math.atan2(y, x)) % 360.0
    return distance_km / KM_PER_NM, bearing


def nearby_airports(
    db: AirportDb,
    position: tuple[float, float],
    radius_nm: float = DEFAULT_RADIUS_NM,
    min_runway_ft: int = DEFAULT_MIN_RUNWAY_FT,
    max_results: int = DEFAULT_MAX_RESULTS,
) -> list[AlternateCandidate]:
    """Qualifying airports within radius, nearest first, ties by ident."""
    if radius_nm <= 0:
        raise ValueError("radius_nm must be positive")
    if max_results < 1:
        raise ValueError("max_results must be >= 1")
    candidates = []
    for airport in db:
        longest = airport.longest_runway_ft
        if longest < min_runway_ft:
            continue
        distance, bearing = great_circle_nm(position, (airport.latitude_deg, airport.longitude_deg))
        if distance > radius_nm:
            continue
        candidates.append(
            AlternateCandidate(
                airport=airport, distance_nm=distance, bearing_deg=bearing, longest_runway_ft=longest,
            )
        )
    candidates.sort(key=lambda c: (c.distance_nm, c.airport.ident))
    return candidates[:max_results]


_WIND_RE = re.compile(r"^(\d{3}|VRB)(\d{2,3})(?:G(\d{2,3}))?(KT|MPS)$")
_WIND_VAR_RE = re.compile(r"^(\d{3})V(\d{3})$")
_VIS_SM_RE = re.compile(r"^([MP])?(\d{1,2})?(?:(\d)/(\d{1,2}))?SM$")
_VIS_M_RE = re.compile(r"^(\d{4})(?:NDV)?$")
_CLOUD_RE = re.compile(r"^(FEW|SCT|BKN|OVC|VV)(\d{3})(?:CB|TCU)?$")
_TEMP_RE = re.compile(r"^(M?\d{1,2})/(M?\d{1,2})?$")
_ALTIM_A_RE = re.compile(r"^A(\d{4})$")
_ALTIM_Q_RE = re.compile(r"^Q(\d{4})$")
_TIME_RE = re.compile(r"^(\d{2})(\d{2})(\d{2})Z$")


def _signed_temp(text: str) -> int:
    return -int(text[1:]) if text.startswith("M") else int(text)


def parse_metar(raw: str) -> Metar:
    """Best-effort METAR decode; unknown groups accumulate in remarks.

    Only the station group is mandatory.  Ceiling is the lowest broken,
    overcast, or vertical-visibility layer.  Speeds normalize to knots and
    pressures to inches of mercury.
    """
    if not raw or not raw.strip():
        raise UnrecognizedStation("empty METAR")
    tokens = raw.split()
    station = tokens[0]
    if len(station) != 4 or not station.isalnum():
        raise UnrecognizedStation(f"first group is not a 4-character station: {station!r}")

    fields: dict = {"station": station, "raw": raw, "groups": [station]}
    layers: list[CloudLayer] = []
    remarks: list[str] = []
    in_remarks = False

    def consume(token: str) -> None:
        fields["groups"].append(token)

    i = 1
    while i < len(tokens):
        token = tokens[i]
        if in_remarks:
            remarks.append(token)
            i += 1
            continue
        if token == "RMK":
            in_remarks = True
            remarks.append(token)
            i += 1
            continue
        if token == "AUTO" and not fields.get("auto"):
            fields["auto"] = True
            consume(token)
        elif token == "COR" and not fields.get("corrected"):
            fields["corrected"] = True
            consume(token)
        elif (m := _TIME_RE.match(token)) and "observed_day" not in fields:
            day, hour, minute = int(m.group(1)), int(m.group(2)), int(m.group(3))
            if day <= 31 and hour <= 23 and minute <= 59:
                fields.update(observed_day=day, observed_hour=hour, observed_minute=minute)
                consume(token)
            else:
                remarks.append(token)
        elif (m := _WIND_RE.match(token)) and "wind_speed_kt" not in fields:
            speed = int(m.group(2))
            gust = int(m.group(3)) if m.group(3) else None
            if m.group(4) == "MPS":
                speed = round(speed * KT_PER_MPS)
                gust = round(gust * KT_PER_MPS) if gust is not None else None
            if m.group(1) == "VRB":
                direction: int | str = "VRB"
            elif speed == 0 and m.group(1) == "000":
                direction = "CALM"
            else:
                direction = int(m.group(1))
            fields.update(wind_dir_deg=direction, wind_speed_kt=speed, gust_kt=gust)
            consume(token)
        elif (m := _WIND_VAR_RE.match(token)) and "wind_var" not in fields:
            fields["wind_var"] = (int(m.group(1)), int(m.group(2)))
            consume(token)
        elif token == "CAVOK" and "visibility_sm" not in fields:
            fields["visibility_sm"] = 10000.0 / METERS_PER_SM
            consume(token)
        elif (
            token.isdigit() and len(token) <= 2 and i + 1 < len(tokens)
            and "visibility_sm" not in fields
            and (frac := _VIS_SM_RE.match(tokens[i + 1])) and frac.group(3)
        ):
            # Mixed-number visibility like "1 1/2SM" spans two tokens.
            fields["visibility_sm"] = int(token) + int(frac.group(3)) / int(frac.group(4))
            consume(token)
            consume(tokens[i + 1])
            i += 2
            continue
        elif (m := _VIS_SM_RE.match(token)) and "visibility_sm" not in fields and (m.group(2) or m.group(3)):
            whole = int(m.group(2)) if m.group(2) else 0
            frac = int(m.group(3)) / int(m.group(4)) if m.group(3) else 0.0
            fields["visibility_sm"] = whole + frac
            consume(token)
        elif (
            (m := _VIS_M_RE.match(token)) and "visibility_sm" not in fields
            and "wind_speed_kt" in fields
        ):
            meters = int(m.group(1))
            fields["visibility_sm"] = (10000.0 if meters == 9999 else float(meters)) / METERS_PER_SM
            consume(token)
        elif m := _CLOUD_RE.match(token):
            layers.append(CloudLayer(cover=m.group(1), base_ft=int(m.group(2)) * 100))
            consume(token)
        elif token in ("SKC", "CLR", "NSC", "NCD"):
            layers.append(CloudLayer(cover=token, base_ft=None))
            consume(token)
        elif (m := _TEMP_RE.match(token)) and "temperature_c" not in fields and "/" in token:
            fields["temperature_c"] = _signed_temp(m.group(1))
            fields["dewpoint_c"] = _signed_temp(m.group(2)) if m.group(2) else None
            consume(token)
        elif (m := _ALTIM_A_RE.match(token)) and "altimeter_inhg" not in fields:
            fields["altimeter_inhg"] = int(m.group(1)) / 100.0
            consume(token)
        elif (m := _ALTIM_Q_RE.match(token)) and "altimeter_inhg" not in fields:
            fields["altimeter_inhg"] = int(m.group(1)) / HPA_PER_INHG
            consume(token)
        else:
            remarks.append(token)
        i += 1

    ceilings = [
        layer.base_ft for layer in layers
        if layer.cover in ("BKN", "OVC", "VV") and layer.base_ft is not None
    ]
    return Metar(
        layers=tuple(layers),
        ceiling_ft=min(ceilings) if ceilings else None,
        remarks=" ".join(remarks),
        **{**fields, "groups": tuple(fields["groups"])},
    )


class MetarSource(Protocol):
    def get(self, station: str) -> str | None:
        """Raw METAR for a station, or None when unavailable."""


class FileMetarSource:
    """Newline-delimited raw METARs; station is each line's first token."""

    def __init__(self, path: str | Path):
        self._by_station: dict[str, str] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            self._by_station[line.split()[0]] = line

    def get(self, station: str) -> str | None:
        return self._by_station.get(station)


class HttpMetarSource:
    """Fetches the newline-delimited METAR feed over HTTP on each lookup."""

    def __init__(self, url: str, timeout_s: float = 10.0, transport: httpx.BaseTransport | None = None):
        self._url = url
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def get(self, station: str) -> str | None:
        try:
            response = self._client.get(self._url)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            log.warning("METAR fetch failed for %s: %s", station, exc)
            return None
        for line in response.text.splitlines():
            line = line.strip()
            if line and line.split()[0] == station:
                return line
        return None


def attach_weather(
    candidates: list[AlternateCandidate], metar_source: MetarSource
) -> list[AlternateCandidate]:
    """Attach parsed METARs where available; failures never drop a candidate."""
    out = []
    for candidate in candidates:
        raw = None
        try:
            raw = metar_source.get(candidate.airport.ident)
        except Exception as exc:
            log.warning("weather lookup failed for %s: %s", candidate.airport.ident, exc)
        metar = None
        if raw:
            try:
                metar = parse_metar(raw)
            except AirportError as exc:
                log.warning("unparseable METAR for %s: %s", candidate.airport.ident, exc)
        out.append(replace(candidate, metar=metar) if metar else candidate)
    return out
