"""Rule-based event confirmation over high-confidence sensor records.

Four rules fire on spatial clusters of records. Each NOAA-prediction, quake,
or news record seeds a cluster containing every record within the proximity
radius (great-circle distance, default 50 km); time windows for witness
conditions are anchored at the seed record's timestamp:

  R1: prediction above the high threshold AND (rain within the lookahead
      days OR (quake above the minor magnitude within one day AND rain
      within the lookahead days))
  R2: quake above the major magnitude AND rain within the lookahead days
      AND any clustered prediction above the low threshold
  R3: quake above the severe magnitude AND rain within the lookahead days
  R4: a news record tagged with one of the configured topic tags

"Rain within N days" means a rain record with value above the configured
minimum (default 0 mm) and timestamp in [seed t, seed t + N days]. A full
match produces a physical event located at the centroid of the triggering
records, timestamped at their earliest record. Seeds satisfying some but
not all top-level conjuncts of R1..R3 are partial matches: their locations
are shared to the metadata store but never persisted.

The persisted event table is an append-only JSON-lines file, one row per
event: ``{lat, lon, event_time, source, url, rule, event_obj_b64}``. Row
ids are line numbers. Near-duplicates (same rule, within 1 km and 1 hour)
collapse onto the existing row.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .ingest import HCRecord
from .locations import Gazetteer, UnknownPlaceError, haversine_km, map_to_cell
from .staging import EVENT_LOCATION, MetadataEntry, MetadataStore

ONE_DAY = 86400
ONE_WEEK = 7 * 86400

FULL = "full"
PARTIAL = "partial"


@dataclass(frozen=True)
class RuleConfig:
    """Thresholds and windows for the event rules."""

    noaa_high: float = 0.70
    noaa_low: float = 0.30
    quake_minor: float = 3.0
    quake_major: float = 6.0
    quake_severe: float = 7.0
    rain_lookahead_days: float = 3.0
    quake_lookahead_days: float = 1.0
    proximity_km: float = 50.0
    rain_min_mm: float = 0.0
    news_tags: tuple[str, ...] = ("landslide", "mudslide")
    # R1's published form is ambiguous between "P and (R or (Q and R))" and
    # "(P and R) or (Q and R)"; True selects the first (prediction required).
    rule1_requires_noaa: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.noaa_low < self.noaa_high <= 1.0):
            raise ValueError("need 0 <= noaa_low < noaa_high <= 1")
        if not (self.quake_minor < self.quake_major < self.quake_severe):
            raise ValueError("need quake_minor < quake_major < quake_severe")
        if self.proximity_km <= 0 or self.rain_lookahead_days < 0:
            raise ValueError("proximity and lookahead must be positive")


@dataclass(frozen=True)
class PhysicalEvent:
    """A confirmed physical event row.

    ``event_obj`` is the JSON serialization of the triggering records, seed
    first; location names for join-time string matching are recovered from
    it rather than stored as a column.
    """

    lat: float
    lon: float
    event_time: int
    source: str
    url: str
    event_obj: bytes

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"event coordinates out of range: {self.lat}, {self.lon}")

    @property
    def cell(self):
        return map_to_cell(self.lat, self.lon)

    def location_names(self) -> list[str]:
        names: list[str] = []
        seen = set()
        for doc in json.loads(self.event_obj):
            loc = doc.get("location")
            if loc and loc.casefold() not in seen:
                seen.add(loc.casefold())
                names.append(loc)
        return names

    def primary_location_name(self) -> str:
        names = self.location_names()
        return names[0] if names else f"{self.lat:.4f},{self.lon:.4f}"


@dataclass(frozen=True)
class RuleMatch:
    event: PhysicalEvent
    rule_id: str
    match: str  # FULL or PARTIAL


@dataclass
class _Located:
    record: HCRecord
    lat: float
    lon: float


def resolve_hc_records(
    records: Iterable[HCRecord], gazetteer: Gazetteer, stats: dict | None = None
) -> list[_Located]:
    """Attach coordinates to records, dropping (and counting) unresolvable ones."""
    out = []
    for rec in records:
        if rec.lat is not None and rec.lon is not None:
            out.append(_Located(rec, float(rec.lat), float(rec.lon)))
            continue
        try:
            lat, lon = gazetteer.geocode(rec.location)
        except UnknownPlaceError:
            if stats is not None:
                stats["unresolved_hc"] = stats.get("unresolved_hc", 0) + 1
            continue
        out.append(_Located(rec, lat, lon))
    out.sort(key=lambda lr: (lr.record.t, lr.record.kind, lr.record.agency, str(lr.record.value)))
    return out


def _news_tagged(rec: HCRecord, tags: tuple[str, ...]) -> bool:
    text = str(rec.value).casefold()
    return any(tag.casefold() in text for tag in tags)


def _rains_near(seed: _Located, cluster: list[_Located], config: RuleConfig) -> list[_Located]:
    horizon = seed.record.t + int(config.rain_lookahead_days * ONE_DAY)
    return [
        lr
        for lr in cluster
        if lr.record.kind == "rain"
        and float(lr.record.value) > config.rain_min_mm
        and seed.record.t <= lr.record.t <= horizon
    ]


def _make_event(seed: _Located, witnesses: list[_Located]) -> PhysicalEvent:
    group = [seed] + [w for w in witnesses if w is not seed]
    lat = sum(lr.lat for lr in group) / len(group)
    lon = sum(lr.lon for lr in group) / len(group)
    event_time = min(lr.record.t for lr in group)
    obj = json.dumps([json.loads(lr.record.to_json()) for lr in group]).encode("utf-8")
    return PhysicalEvent(
        lat=lat,
        lon=lon,
        event_time=event_time,
        source=seed.record.agency,
        url=seed.record.link or "NULL",
        event_obj=obj,
    )


def evaluate_rules(
    records: Iterable[HCRecord],
    config: RuleConfig,
    now: int | None = None,
    gazetteer: Gazetteer | None = None,
    stats: dict | None = None,
) -> list[RuleMatch]:
    """Evaluate the four rules over one batch of high-confidence records.

    Records with named locations are resolved through the gazetteer first;
    unresolvable ones are excluded and counted in ``stats``. Returns full and
    partial matches in deterministic (seed time, rule) order.
    """
    located = resolve_hc_records(records, gazetteer or Gazetteer([]), stats)
    matches: list[RuleMatch] = []
    for seed in located:
        cluster = [
            lr
            for lr in located
            if haversine_km(seed.lat, seed.lon, lr.lat, lr.lon) <= config.proximity_km
        ]
        kind = seed.record.kind
        if kind == "noaa_prediction":
            matches.extend(_rule1(seed, cluster, config))
        elif kind == "quake":
            matches.extend(_rule2(seed, cluster, config))
            matches.extend(_rule3(seed, cluster, config))
            if not config.rule1_requires_noaa:
                matches.extend(_rule1_quake_branch(seed, cluster, config))
        elif kind == "news":
            if _news_tagged(seed.record, config.news_tags):
                matches.append(RuleMatch(_make_event(seed, []), "R4", FULL))
    return matches


def _rule1(seed: _Located, cluster: list[_Located], config: RuleConfig) -> list[RuleMatch]:
    prediction_high = float(seed.record.value) > config.noaa_high
    rains = _rains_near(seed, cluster, config)
    quake_horizon = seed.record.t + int(config.quake_lookahead_days * ONE_DAY)
    quakes = [
        lr
        for lr in cluster
        if lr.record.kind == "quake"
        and float(lr.record.value) > config.quake_minor
        and seed.record.t <= lr.record.t <= quake_horizon
    ]
    trigger_branch = bool(rains) or (bool(quakes) and bool(rains))
    if prediction_high and trigger_branch:
        return [RuleMatch(_make_event(seed, rains + quakes), "R1", FULL)]
    if prediction_high or trigger_branch:
        return [RuleMatch(_make_event(seed, rains + quakes), "R1", PARTIAL)]
    return []


def _rule1_quake_branch(
    seed: _Located, cluster: list[_Located], config: RuleConfig
) -> list[RuleMatch]:
    """Disjunctive reading of R1: quake above minor within a day plus rain,
    with no prediction required. Only active when rule1_requires_noaa=False."""
    if float(seed.record.value) <= config.quake_minor:
        return []
    rains = _rains_near(seed, cluster, config)
    if rains:
        return [RuleMatch(_make_event(seed, rains), "R1", FULL)]
    return []


def _rule2(seed: _Located, cluster: list[_Located], config: RuleConfig) -> list[RuleMatch]:
    major = float(seed.record.value) > config.quake_major
    rains = _rains_near(seed, cluster, config)
    predictions = [
        lr
        for lr in cluster
        if lr.record.kind == "noaa_prediction" and float(lr.record.value) > config.noaa_low
    ]
    conjuncts = [major, bool(rains), bool(predictions)]
    if all(conjuncts):
        return [RuleMatch(_make_event(seed, rains + predictions), "R2", FULL)]
    if any(conjuncts):
        return [RuleMatch(_make_event(seed, rains + predictions), "R2", PARTIAL)]
    return []


def _rule3(seed: _Located, cluster: list[_Located], config: RuleConfig) -> list[RuleMatch]:
    severe = float(seed.record.value) > config.quake_severe
    rains = _rains_near(seed, cluster, config)
    if severe and rains:
        return [RuleMatch(_make_event(seed, rains), "R3", FULL)]
    if severe or rains:
        return [RuleMatch(_make_event(seed, rains), "R3", PARTIAL)]
    return []


class EventTable:
    """File-backed table of confirmed physical events (append-only JSON lines)."""

    DEDUP_KM = 1.0
    DEDUP_SECONDS = 3600

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._rows: list[tuple[PhysicalEvent, str]] = []
        self._lock = threading.RLock()
        if self.path is not None and self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._rows.append(self._row_from_json(line))

    @staticmethod
    def _row_from_json(line: str) -> tuple[PhysicalEvent, str]:
        doc = json.loads(line)
        event = PhysicalEvent(
            lat=doc["lat"],
            lon=doc["lon"],
            event_time=doc["event_time"],
            source=doc["source"],
            url=doc["url"],
            event_obj=base64.b64decode(doc["event_obj_b64"]),
        )
        return event, doc["rule"]

    @staticmethod
    def _row_to_json(event: PhysicalEvent, rule: str) -> str:
        return json.dumps(
            {
                "lat": event.lat,
                "lon": event.lon,
                "event_time": event.event_time,
                "source": event.source,
                "url": event.url,
                "rule": rule,
                "event_obj_b64": base64.b64encode(event.event_obj).decode("ascii"),
            },
            sort_keys=True,
        )

    def persist_event(self, event: PhysicalEvent, rule: str) -> int:
        """Append an event; near-duplicates return the existing row id."""
        with self._lock:
            for row_id, (existing, existing_rule) in enumerate(self._rows):
                if (
                    existing_rule == rule
                    and abs(existing.event_time - event.event_time) < self.DEDUP_SECONDS
                    and haversine_km(existing.lat, existing.lon, event.lat, event.lon)
                    < self.DEDUP_KM
                ):
                    return row_id
            self._rows.append((event, rule))
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(self._row_to_json(event, rule) + "\n")
            return len(self._rows) - 1

    def rows(self) -> list[tuple[int, PhysicalEvent, str]]:
        with self._lock:
            return [(i, ev, rule) for i, (ev, rule) in enumerate(self._rows)]

    def __len__(self) -> int:
        with self._lock:
            return len(self._rows)


def share_locations(
    matches: Iterable[RuleMatch],
    mstore: MetadataStore,
    now: int | None = None,
    ttl: int = ONE_WEEK,
) -> int:
    """Push every match's primary location to the metadata store.

    Full and partial matches alike are shared (one entry per match) with a
    one-week TTL; persistence to the event table is a separate concern.
    Returns the number of matches shared.
    """
    count = 0
    for match in matches:
        base = match.event.event_time if now is None else now
        mstore.put(
            MetadataEntry(EVENT_LOCATION, match.event.primary_location_name(), base + ttl),
            extend_if_below=ttl,
            now=base,
        )
        count += 1
    return count
