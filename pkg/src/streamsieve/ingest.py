"""Streamers that turn raw replay files into staged key/value records.

A social post is the tuple (p, l, t, hl, u): text content, named locations,
unix timestamp, hyperlinks, and user id. High-confidence records carry a
numeric reading (rain mm, quake magnitude, prediction probability) or a news
summary, plus a location and timestamp.

Input files are newline-delimited JSON sorted by ``t``. Social records:
``{"text", "t", "user", "links"?, "geo"?: [lat, lon], "src", "post_id"?,
"lang"?}``. High-confidence records: ``{"kind", "value", "location" |
("lat","lon"), "t", "link"?, "agency"}``. Malformed lines are skipped,
counted, and kept as rejects; the rejects later serve as the irrelevant
training pool, so their text is preserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

from .staging import StagingKey

SOCIAL = "social"
HIGH_CONFIDENCE = "high_confidence"

SOCIAL_STREAMER = "ss"
REPUTABLE_STREAMER = "rs"
NUMERIC_LANG = "num"

HC_KINDS = ("rain", "quake", "noaa_prediction", "news")


class RecordError(ValueError):
    """Raw record is missing required fields or out of contract."""


@dataclass
class SocialPost:
    """One social-source post; ``cell`` stays None until location resolution.

    ``post_id`` is not part of the wire tuple but is carried through labeling
    and reports so predictions can be scored against ground truth.
    """

    p: str
    l: list[str] = field(default_factory=list)
    t: int = 0
    hl: list[str] = field(default_factory=list)
    u: str = ""
    src: str = ""
    cell: tuple[int, int] | None = None
    post_id: str | None = None
    lang: str = "en"

    def __post_init__(self) -> None:
        if not self.p.strip():
            raise RecordError("post text is empty")
        if self.t <= 0:
            raise RecordError(f"post timestamp must be positive, got {self.t}")

    def to_json(self) -> str:
        doc = {
            "p": self.p,
            "l": self.l,
            "t": self.t,
            "hl": self.hl,
            "u": self.u,
            "src": self.src,
            "cell": list(self.cell) if self.cell is not None else None,
            "post_id": self.post_id,
            "lang": self.lang,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, raw: str | bytes) -> "SocialPost":
        doc = json.loads(raw)
        cell = doc.get("cell")
        return cls(
            p=doc["p"],
            l=list(doc.get("l") or []),
            t=int(doc["t"]),
            hl=list(doc.get("hl") or []),
            u=doc.get("u", ""),
            src=doc.get("src", ""),
            cell=tuple(cell) if cell is not None else None,
            post_id=doc.get("post_id"),
            lang=doc.get("lang", "en"),
        )

    def with_resolution(self, locations: list[str], cell: tuple[int, int] | None) -> "SocialPost":
        return replace(self, l=list(locations), cell=cell)


@dataclass
class HCRecord:
    """One high-confidence sensor or curated-feed record."""

    kind: str
    value: float | str
    t: int
    location: str | None = None
    lat: float | None = None
    lon: float | None = None
    link: str | None = None
    agency: str = ""

    def __post_init__(self) -> None:
        if self.kind not in HC_KINDS:
            raise RecordError(f"unknown high-confidence kind {self.kind!r}")
        if self.kind == "noaa_prediction" and not (0.0 <= float(self.value) <= 1.0):
            raise RecordError(f"prediction probability out of [0,1]: {self.value}")
        if self.kind == "quake" and float(self.value) < 0:
            raise RecordError(f"quake magnitude must be non-negative: {self.value}")
        if self.location is None and (self.lat is None or self.lon is None):
            raise RecordError("record needs a named location or lat/lon")
        if self.t <= 0:
            raise RecordError(f"record timestamp must be positive, got {self.t}")

    @property
    def is_news(self) -> bool:
        return self.kind == "news"

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "value": self.value,
            "t": self.t,
            "location": self.location,
            "lat": self.lat,
            "lon": self.lon,
            "link": self.link,
            "agency": self.agency,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, raw: str | bytes) -> "HCRecord":
        doc = json.loads(raw)
        return cls(
            kind=doc["kind"],
            value=doc["value"],
            t=int(doc["t"]),
            location=doc.get("location"),
            lat=doc.get("lat"),
            lon=doc.get("lon"),
            link=doc.get("link"),
            agency=doc.get("agency", ""),
        )


@dataclass(frozen=True)
class RejectedRecord:
    """A raw record the streamer refused, with enough context to reuse its text."""

    text: str
    reason: str
    approx_t: int
    src: str
    reject_id: str | None = None


def trivial_metadata(raw: dict) -> SocialPost:
    """Build a SocialPost from a raw social record, copying cheap fields only.

    Locations stay empty unless the record carries an explicit geotag; text
    mining happens downstream. Missing text or timestamp raises RecordError.
    """
    text = raw.get("text")
    if not text or not str(text).strip():
        raise RecordError("missing text")
    if "t" not in raw or raw["t"] is None:
        raise RecordError("missing timestamp")
    locations: list[str] = []
    geo = raw.get("geo")
    if geo is not None:
        locations.append(f"{geo[0]},{geo[1]}")
    return SocialPost(
        p=str(text),
        l=locations,
        t=int(raw["t"]),
        hl=list(raw.get("links") or []),
        u=str(raw.get("user", "")),
        src=str(raw.get("src", "unknown")),
        post_id=raw.get("post_id"),
        lang=str(raw.get("lang", "en")),
    )


def _hc_from_raw(raw: dict) -> HCRecord:
    if "kind" not in raw or "t" not in raw or raw.get("t") is None:
        raise RecordError("missing kind or timestamp")
    return HCRecord(
        kind=raw["kind"],
        value=raw.get("value", ""),
        t=int(raw["t"]),
        location=raw.get("location"),
        lat=raw.get("lat"),
        lon=raw.get("lon"),
        link=raw.get("link"),
        agency=str(raw.get("agency", "unknown")),
    )


class FileStreamer:
    """Replays a newline-JSON file as (StagingKey, payload) pairs.

    Keys follow the export template convention: streamer code "ss" or "rs",
    language from the record ("num" for numeric sensor records), the topic
    name, the record's source, its url or "NULL", an id that auto-increments
    per source, and the record timestamp as commit time. Streaming the same
    file twice yields byte-identical sequences.
    """

    def __init__(self, path: str | Path, role: str, topic: str) -> None:
        if role not in (SOCIAL, HIGH_CONFIDENCE):
            raise ValueError(f"role must be {SOCIAL!r} or {HIGH_CONFIDENCE!r}")
        self.path = Path(path)
        self.role = role
        self.topic = topic
        self.rejects: list[RejectedRecord] = []
        self.emitted = 0
        self._next_id: dict[str, int] = {}
        self._last_t: int | None = None
        self._last_valid_t = 0

    def _take_id(self, src: str) -> int:
        n = self._next_id.get(src, 0)
        self._next_id[src] = n + 1
        return n

    def __iter__(self) -> Iterator[tuple[StagingKey, bytes]]:
        streamer = SOCIAL_STREAMER if self.role == SOCIAL else REPUTABLE_STREAMER
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError:
                    self.rejects.append(
                        RejectedRecord("", f"line {lineno}: invalid json", self._last_valid_t, "unknown")
                    )
                    continue
                try:
                    if self.role == SOCIAL:
                        post = trivial_metadata(raw)
                        payload = post.to_json().encode("utf-8")
                        lang, src = post.lang, post.src
                        url = raw.get("url", "NULL")
                        t = post.t
                    else:
                        rec = _hc_from_raw(raw)
                        payload = rec.to_json().encode("utf-8")
                        lang = "en" if rec.is_news else NUMERIC_LANG
                        src = rec.agency
                        url = rec.link or "NULL"
                        t = rec.t
                except RecordError as exc:
                    self.rejects.append(
                        RejectedRecord(
                            str(raw.get("text") or raw.get("value") or ""),
                            str(exc),
                            self._last_valid_t,
                            str(raw.get("src") or raw.get("agency") or "unknown"),
                            reject_id=raw.get("post_id"),
                        )
                    )
                    continue
                if self._last_t is not None and t < self._last_t:
                    raise RecordError(
                        f"{self.path}:{lineno}: timestamps not sorted ({t} after {self._last_t})"
                    )
                self._last_t = t
                self._last_valid_t = t
                key = StagingKey(
                    streamer=streamer,
                    lang=lang,
                    topic=self.topic,
                    src=src,
                    url=str(url) if url else "NULL",
                    id=self._take_id(src),
                    timestamp=t,
                )
                self.emitted += 1
                yield key, payload


def stream_from_file(path: str | Path, role: str, topic: str) -> FileStreamer:
    """Convenience constructor mirroring the CLI surface."""
    return FileStreamer(path, role, topic)
