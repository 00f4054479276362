"""Keyed staging store for decoupled pipeline stages, plus a TTL metadata store.

Producers publish key/value pairs under a 7-field colon key. Consumers
register import templates (literal fields or ``*`` wildcards), poll records
whose keys match, and acknowledge them when done. A record stays
``unprocessed`` until every importer whose template matched it at publish
time has acknowledged it; only then does it become ``processed`` and
eligible for garbage collection. Polling never changes state, so delivery
is at-least-once until ack and consumers must be idempotent.

Both stores accept an injected clock (``Callable[[], int]`` returning unix
seconds) so TTL behaviour and replay tests are deterministic.

On-disk journal (optional): newline-delimited JSON, one op per line,
``{"op": ..., "key": ..., "value_b64"?: ..., "importer"?: ..., "ts": ...}``
where ``key`` is always the serialized 7-field colon string (for
registration ops it is the template pattern). Reopening a store with the
same journal path replays it and reconstructs records, pending sets and
registrations exactly, which is what preserves in-flight work across a
process crash.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

Clock = Callable[[], int]

KEY_FIELDS = ("streamer", "lang", "topic", "src", "url", "id", "timestamp")
WILDCARD = "*"

UNPROCESSED = "unprocessed"
PROCESSED = "processed"


class StagingError(Exception):
    """Base error for staging-store misuse."""


class TemplateError(StagingError):
    """Malformed key or template pattern."""


class DuplicateKeyError(StagingError):
    """Exact key already published."""


class UnknownImporterError(StagingError):
    """Poll or ack with an unregistered importer id."""


class AckError(StagingError):
    """Ack of a record that is missing or not pending for this importer."""


def wall_clock() -> int:
    return int(time.time())


class ManualClock:
    """Steppable clock for tests and replay runs."""

    def __init__(self, start: int = 0) -> None:
        self.t = int(start)

    def __call__(self) -> int:
        return self.t

    def advance(self, seconds: int) -> None:
        self.t += int(seconds)


def _split_key_fields(raw: str, what: str) -> list[str]:
    """Split a colon key into exactly 7 fields.

    The url field (index 4) may itself contain colons, so the split is
    anchored: four fields from the left, two from the right, url is the
    remainder in between.
    """
    parts = raw.split(":")
    if len(parts) < len(KEY_FIELDS):
        raise TemplateError(
            f"{what} {raw!r} has {len(parts)} fields, expected {len(KEY_FIELDS)}"
        )
    return parts[:4] + [":".join(parts[4:-2])] + parts[-2:]


@dataclass(frozen=True, order=True)
class StagingKey:
    """The 7-field staging key: streamer, lang, topic, src, url, id, timestamp.

    ``streamer`` is "ss" for social sources, "rs" for reputable/high-confidence
    sources, or a metadata-extractor name for re-exported records. ``id`` is
    assigned by the producer and must be strictly increasing per
    (streamer, src); ``timestamp`` is the unix second of commit.
    """

    streamer: str
    lang: str
    topic: str
    src: str
    url: str
    id: int
    timestamp: int

    def __post_init__(self) -> None:
        for name in ("streamer", "lang", "topic", "src"):
            value = getattr(self, name)
            if not value or ":" in value:
                raise TemplateError(f"key field {name}={value!r} must be non-empty and colon-free")
        if self.id < 0:
            raise TemplateError(f"key id must be non-negative, got {self.id}")

    def serialize(self) -> str:
        return ":".join(
            (self.streamer, self.lang, self.topic, self.src, self.url, str(self.id), str(self.timestamp))
        )

    @classmethod
    def parse(cls, raw: str) -> "StagingKey":
        f = _split_key_fields(raw, "key")
        try:
            kid, ts = int(f[5]), int(f[6])
        except ValueError as exc:
            raise TemplateError(f"key {raw!r} has non-numeric id/timestamp") from exc
        return cls(f[0], f[1], f[2], f[3], f[4], kid, ts)


@dataclass(frozen=True)
class KeyTemplate:
    """A 7-field match pattern; each field is a literal or the ``*`` wildcard.

    Literals match case-sensitively and exactly; ``*`` matches any field value.
    """

    fields: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.fields) != len(KEY_FIELDS):
            raise TemplateError(
                f"template has {len(self.fields)} fields, expected {len(KEY_FIELDS)}"
            )

    @classmethod
    def parse(cls, pattern: str) -> "KeyTemplate":
        return cls(tuple(_split_key_fields(pattern, "template")))

    @property
    def pattern(self) -> str:
        return ":".join(self.fields)

    def matches(self, key: StagingKey) -> bool:
        values = (key.streamer, key.lang, key.topic, key.src, key.url, str(key.id), str(key.timestamp))
        return all(f == WILDCARD or f == v for f, v in zip(self.fields, values))


@dataclass(frozen=True)
class Registration:
    reg_id: str
    process: str
    direction: str  # "export" or "import"
    template: KeyTemplate


@dataclass(frozen=True)
class StagedRecord:
    """Immutable view of one staged key/value pair."""

    key: StagingKey
    value: bytes
    pending_importers: frozenset[str]

    @property
    def status(self) -> str:
        return PROCESSED if not self.pending_importers else UNPROCESSED


class _Slot:
    __slots__ = ("key", "value", "pending")

    def __init__(self, key: StagingKey, value: bytes, pending: set[str]) -> None:
        self.key = key
        self.value = value
        self.pending = pending


class StagingStore:
    """Journal-backed staging store with template registration and ack GC.

    GC never runs inline with ack: processed records are deleted by explicit
    ``gc()`` calls or opportunistically from publish/poll once ``gc_period``
    seconds have elapsed since the last sweep.
    """

    def __init__(
        self,
        journal_path: str | Path | None = None,
        clock: Clock = wall_clock,
        gc_period: int | None = 60,
    ) -> None:
        self.clock = clock
        self.gc_period = gc_period
        self._lock = threading.RLock()
        self._slots: dict[str, _Slot] = {}
        self._registrations: dict[str, Registration] = {}
        self._reg_lookup: dict[tuple[str, str, str], str] = {}
        self._last_id: dict[tuple[str, str], int] = {}
        self._published = 0
        self._deleted = 0
        self._last_gc = clock()
        self._journal_path = Path(journal_path) if journal_path is not None else None
        self._journal_fh = None
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._replay()
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal_fh = self._journal_path.open("a", encoding="utf-8")

    # ----------------------------------------------------------------- journal

    def _append_journal(self, entry: dict) -> None:
        if self._journal_fh is not None:
            self._journal_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._journal_fh.flush()

    def _replay(self) -> None:
        with self._journal_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                op = entry["op"]
                if op in ("register_import", "register_export"):
                    self._apply_register(
                        entry["importer"], op.removeprefix("register_"), entry["key"]
                    )
                elif op == "publish":
                    value = base64.b64decode(entry["value_b64"])
                    self._apply_publish(StagingKey.parse(entry["key"]), value)
                elif op == "ack":
                    slot = self._slots.get(entry["key"])
                    if slot is not None:
                        slot.pending.discard(entry["importer"])
                elif op == "delete":
                    if entry["key"] in self._slots:
                        del self._slots[entry["key"]]
                        self._deleted += 1

    # ------------------------------------------------------------- registration

    def register_template(self, process_name: str, direction: str, pattern: str) -> str:
        """Register an export or import key template; idempotent per triple."""
        if direction not in ("export", "import"):
            raise TemplateError(f"direction must be 'export' or 'import', got {direction!r}")
        template = KeyTemplate.parse(pattern)
        with self._lock:
            lookup = (process_name, direction, template.pattern)
            existing = self._reg_lookup.get(lookup)
            if existing is not None:
                return existing
            reg_id = self._apply_register(process_name, direction, template.pattern)
            self._append_journal(
                {
                    "op": f"register_{direction}",
                    "key": template.pattern,
                    "importer": process_name,
                    "ts": self.clock(),
                }
            )
            return reg_id

    def _apply_register(self, process_name: str, direction: str, pattern: str) -> str:
        template = KeyTemplate.parse(pattern)
        lookup = (process_name, direction, template.pattern)
        existing = self._reg_lookup.get(lookup)
        if existing is not None:
            return existing
        reg_id = f"{direction[:3]}-{len(self._registrations):04d}"
        self._registrations[reg_id] = Registration(reg_id, process_name, direction, template)
        self._reg_lookup[lookup] = reg_id
        return reg_id

    def _matching_importer_processes(self, key: StagingKey) -> set[str]:
        return {
            reg.process
            for reg in self._registrations.values()
            if reg.direction == "import" and reg.template.matches(key)
        }

    # ------------------------------------------------------------------ publish

    def publish(self, key: StagingKey, value: bytes) -> None:
        """Store a record; pending importers are fixed by current registrations.

        A record no registered importer matches is immediately processed
        (nothing will ever consume it). Duplicate exact keys are rejected, as
        are ids that do not increase within their (streamer, src) sequence.
        """
        with self._lock:
            raw = key.serialize()
            if raw in self._slots:
                raise DuplicateKeyError(f"key already published: {raw}")
            seq = (key.streamer, key.src)
            last = self._last_id.get(seq)
            if last is not None and key.id <= last:
                raise DuplicateKeyError(
                    f"id {key.id} not increasing for {seq}; last was {last}"
                )
            self._apply_publish(key, value)
            self._append_journal(
                {
                    "op": "publish",
                    "key": raw,
                    "value_b64": base64.b64encode(value).decode("ascii"),
                    "ts": self.clock(),
                }
            )
        self._maybe_gc()

    def _apply_publish(self, key: StagingKey, value: bytes) -> None:
        raw = key.serialize()
        pending = self._matching_importer_processes(key)
        self._slots[raw] = _Slot(key, value, pending)
        self._published += 1
        seq = (key.streamer, key.src)
        if key.id > self._last_id.get(seq, -1):
            self._last_id[seq] = key.id

    def has_key(self, key: StagingKey) -> bool:
        with self._lock:
            return key.serialize() in self._slots

    # --------------------------------------------------------------- poll / ack

    def poll_unprocessed(self, importer: str, max_n: int) -> list[StagedRecord]:
        """Up to max_n matching records still pending for this importer, by id.

        Does not change record state; re-polling before ack returns the same
        records again.
        """
        with self._lock:
            reg = self._registrations.get(importer)
            if reg is None or reg.direction != "import":
                raise UnknownImporterError(f"unknown importer registration: {importer!r}")
            hits = [
                slot
                for slot in self._slots.values()
                if reg.process in slot.pending and reg.template.matches(slot.key)
            ]
            hits.sort(key=lambda s: (s.key.id, s.key.timestamp, s.key.serialize()))
            out = [
                StagedRecord(s.key, s.value, frozenset(s.pending)) for s in hits[:max_n]
            ]
        self._maybe_gc()
        return out

    def ack(self, importer: str, key: StagingKey | str) -> str:
        """Acknowledge completion; returns the record's status afterwards."""
        with self._lock:
            reg = self._registrations.get(importer)
            if reg is None or reg.direction != "import":
                raise UnknownImporterError(f"unknown importer registration: {importer!r}")
            raw = key if isinstance(key, str) else key.serialize()
            slot = self._slots.get(raw)
            if slot is None:
                raise AckError(f"no such record: {raw}")
            if reg.process not in slot.pending:
                raise AckError(f"record not pending for {reg.process!r}: {raw}")
            slot.pending.discard(reg.process)
            self._append_journal(
                {"op": "ack", "key": raw, "importer": reg.process, "ts": self.clock()}
            )
            return PROCESSED if not slot.pending else UNPROCESSED

    # ---------------------------------------------------------------------- gc

    def gc(self) -> int:
        """Delete processed records; returns how many were removed."""
        with self._lock:
            dead = [raw for raw, slot in self._slots.items() if not slot.pending]
            for raw in dead:
                del self._slots[raw]
                self._deleted += 1
                self._append_journal({"op": "delete", "key": raw, "ts": self.clock()})
            self._last_gc = self.clock()
            return len(dead)

    def _maybe_gc(self) -> None:
        if self.gc_period is None:
            return
        with self._lock:
            due = self.clock() - self._last_gc >= self.gc_period
        if due:
            self.gc()

    # ------------------------------------------------------------------- audit

    def audit(self) -> dict[str, int]:
        """Conservation counters: every published record is in exactly one bucket."""
        with self._lock:
            unprocessed = sum(1 for s in self._slots.values() if s.pending)
            awaiting = sum(1 for s in self._slots.values() if not s.pending)
            return {
                "published": self._published,
                "unprocessed": unprocessed,
                "processed_awaiting_gc": awaiting,
                "deleted": self._deleted,
            }

    def records(self) -> list[StagedRecord]:
        with self._lock:
            return [
                StagedRecord(s.key, s.value, frozenset(s.pending))
                for s in self._slots.values()
            ]

    def close(self) -> None:
        if self._journal_fh is not None:
            self._journal_fh.close()
            self._journal_fh = None


LOCATION_STRING = "location-string"
EVENT_LOCATION = "event-location"


@dataclass(frozen=True)
class MetadataEntry:
    """A shared string with an expiry; ``kind`` records which dataflow wrote it.

    ``created_at`` is the logical time the entry first appeared; lookups are
    bounded by it so replaying a journal after a crash cannot make an entry
    visible earlier than it was in the original run.
    """

    kind: str
    value: str
    expires_at: int
    created_at: int = 0


class MetadataStore:
    """TTL store of location strings shared between pipeline stages.

    Entries are keyed by case-folded value. Lookups never return an entry
    once the clock has passed its expiry. The optional journal records the
    post-policy expiry of every put so a reopened store is state-identical.
    """

    def __init__(self, clock: Clock = wall_clock, journal_path: str | Path | None = None) -> None:
        self.clock = clock
        self._lock = threading.RLock()
        self._entries: dict[str, MetadataEntry] = {}
        self._journal_path = Path(journal_path) if journal_path is not None else None
        self._journal_fh = None
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._replay()
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal_fh = self._journal_path.open("a", encoding="utf-8")

    def _replay(self) -> None:
        with self._journal_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                e = json.loads(line)
                self._entries[e["value"].casefold()] = MetadataEntry(
                    e["kind"], e["value"], e["expires_at"], e.get("created_at", 0)
                )

    def _journal(self, entry: MetadataEntry) -> None:
        if self._journal_fh is not None:
            self._journal_fh.write(
                json.dumps(
                    {
                        "op": "mput",
                        "kind": entry.kind,
                        "value": entry.value,
                        "expires_at": entry.expires_at,
                        "created_at": entry.created_at,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            self._journal_fh.flush()

    def put(
        self,
        entry: MetadataEntry,
        extend_if_below: int | None = None,
        now: int | None = None,
    ) -> MetadataEntry:
        """Store or refresh an entry.

        With ``extend_if_below=T``: if an entry with the same value exists and
        its remaining TTL is under T seconds, the remaining TTL grows by T;
        otherwise the existing entry is left alone. Without it, the expiry is
        overwritten. ``now`` defaults to the store clock; pipeline stages pass
        the originating record's timestamp instead. Returns the entry now in
        the store.
        """
        now = self.clock() if now is None else now
        if entry.expires_at <= now:
            raise ValueError(f"expires_at {entry.expires_at} is not in the future (now={now})")
        with self._lock:
            slot = entry.value.casefold()
            if entry.created_at == 0:
                entry = MetadataEntry(entry.kind, entry.value, entry.expires_at, now)
            current = self._entries.get(slot)
            if current is not None and current.expires_at <= now:
                current = None  # expired entries are as good as absent
            if extend_if_below is None or current is None:
                stored = entry
            else:
                created = min(current.created_at, now)
                if current.expires_at - now < extend_if_below:
                    stored = MetadataEntry(
                        current.kind, current.value, current.expires_at + extend_if_below, created
                    )
                elif created != current.created_at:
                    stored = MetadataEntry(current.kind, current.value, current.expires_at, created)
                else:
                    stored = current
            if stored is not current:
                self._entries[slot] = stored
                self._journal(stored)
            return stored

    @staticmethod
    def _live(e: MetadataEntry, now: int) -> bool:
        return e.created_at <= now < e.expires_at

    def lookup_substrings(self, text: str, now: int | None = None) -> list[MetadataEntry]:
        """All live entries whose value occurs case-insensitively in text."""
        now = self.clock() if now is None else now
        folded = text.casefold()
        with self._lock:
            hits = [
                e
                for e in self._entries.values()
                if self._live(e, now) and e.value.casefold() in folded
            ]
        hits.sort(key=lambda e: e.value.casefold())
        return hits

    def get(self, value: str, now: int | None = None) -> MetadataEntry | None:
        now = self.clock() if now is None else now
        with self._lock:
            e = self._entries.get(value.casefold())
        return e if e is not None and self._live(e, now) else None

    def size(self, now: int | None = None) -> int:
        now = self.clock() if now is None else now
        with self._lock:
            return sum(1 for e in self._entries.values() if self._live(e, now))

    def close(self) -> None:
        if self._journal_fh is not None:
            self._journal_fh.close()
            self._journal_fh = None
