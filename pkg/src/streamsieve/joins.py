"""Joins between confirmed events and social posts, and the labels they yield.

A join runs in two steps: window selection (either a user window of +/- N
days around the event, or a data window of distance + time thresholds) and
a match predicate. The predicate conjoins grid-cell equality and topic
keyword presence (both optional) with the configured method:

  schema_match       equality on an application-declared field mapping
  string_similarity  sim(post location string, event location name) > threshold
  natural            equality on the shared attributes (cell, UTC date)

Matched posts become ``relevant`` training samples with the event row id as
evidence; streamer-rejected posts become ``irrelevant`` samples; everything
else is left unlabeled for prediction.

The bucketed matcher (`match_events`) indexes posts by cell and sweeps a
time-sorted order so similarity is only evaluated on candidates that survive
the cheap filters; its output is defined by the plain per-event `join`.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .events import PhysicalEvent
from .ingest import RejectedRecord, SocialPost
from .locations import cell_center, haversine_km

ONE_DAY = 86400

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"

_POST_FIELDS = ("cell", "date", "src", "lang")
_EVENT_FIELDS = ("cell", "date", "source")


def _tokens(s: str) -> set[str]:
    """Maximal alphanumeric runs after case folding; punctuation separates."""
    out: set[str] = set()
    current: list[str] = []
    for ch in s.casefold():
        if ch.isalnum():
            current.append(ch)
        elif current:
            out.add("".join(current))
            current = []
    if current:
        out.add("".join(current))
    return out


def jaccard(a: str, b: str) -> float:
    """Token-set Jaccard similarity; two empty token sets count as identical."""
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 1.0
    union = ta | tb
    return len(ta & tb) / len(union)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[len(b)]


def levenshtein_ratio(a: str, b: str) -> float:
    """1 - editdist/max(len); empty-vs-empty is identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


_SIMILARITY_FNS = {"jaccard": jaccard, "levenshtein_ratio": levenshtein_ratio}


@dataclass(frozen=True)
class JoinSpec:
    """How posts are matched to events."""

    method: str = "string_similarity"
    similarity_fn: str = "jaccard"
    threshold: float = 0.5
    window: str = "user"  # "user" or "data"
    days_before: float = 3.0
    days_after: float = 3.0
    dist_km: float = 50.0
    dt_seconds: int = ONE_DAY
    require_cell: bool = True
    keywords: tuple[str, ...] = ()
    schema_map: tuple[tuple[str, str], ...] = (("cell", "cell"),)
    compare_all_locations: bool = True

    def __post_init__(self) -> None:
        if self.method not in ("schema_match", "string_similarity", "natural"):
            raise ValueError(f"unknown join method {self.method!r}")
        if self.similarity_fn not in _SIMILARITY_FNS:
            raise ValueError(f"unknown similarity fn {self.similarity_fn!r}")
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.window not in ("user", "data"):
            raise ValueError(f"unknown window kind {self.window!r}")
        if self.days_before < 0 or self.days_after < 0:
            raise ValueError("window days must be non-negative")
        if self.method == "schema_match":
            for post_field, event_field in self.schema_map:
                if post_field not in _POST_FIELDS:
                    raise ValueError(f"unmapped post field in schema_map: {post_field!r}")
                if event_field not in _EVENT_FIELDS:
                    raise ValueError(f"unmapped event field in schema_map: {event_field!r}")


@dataclass(frozen=True)
class LabeledPost:
    post: SocialPost
    label: str
    evidence: str

    def __post_init__(self) -> None:
        if self.label not in (RELEVANT, IRRELEVANT):
            raise ValueError(f"label must be relevant/irrelevant, got {self.label!r}")


def _utc_date(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%d")


def select_window(
    event: PhysicalEvent,
    posts: Iterable[SocialPost],
    spec: JoinSpec,
    now: int | None = None,
) -> list[SocialPost]:
    """Posts inside the event's join window.

    User windows span [event_time - days_before, event_time + days_after],
    inclusive. Data windows require the post cell's center within dist_km of
    the event and |post t - event time| <= dt_seconds.
    """
    out = []
    if spec.window == "user":
        lo = event.event_time - int(spec.days_before * ONE_DAY)
        hi = event.event_time + int(spec.days_after * ONE_DAY)
        out = [p for p in posts if lo <= p.t <= hi]
    else:
        for p in posts:
            if p.cell is None or abs(p.t - event.event_time) > spec.dt_seconds:
                continue
            plat, plon = cell_center(p.cell)
            if haversine_km(event.lat, event.lon, plat, plon) <= spec.dist_km:
                out.append(p)
    return out


def _keyword_hit(text: str, keywords: tuple[str, ...]) -> bool:
    folded = text.casefold()
    return any(kw.casefold() in folded for kw in keywords)


def _field_value(obj, name: str, is_event: bool):
    if name == "cell":
        return obj.cell
    if name == "date":
        return _utc_date(obj.t if not is_event else obj.event_time)
    if name == "src":
        return obj.src
    if name == "lang":
        return obj.lang
    if name == "source":
        return obj.source
    raise ValueError(f"unknown join field {name!r}")


def _similarity_match(
    post: SocialPost, event_name: str, spec: JoinSpec, stats: dict | None
) -> bool:
    fn = _SIMILARITY_FNS[spec.similarity_fn]
    names = post.l if spec.compare_all_locations else post.l[:1]
    best = 0.0
    for name in names:
        if stats is not None:
            stats["sim_evals"] = stats.get("sim_evals", 0) + 1
        best = max(best, fn(name, event_name))
        if best > spec.threshold:
            break
    return best > spec.threshold


def _method_match(
    post: SocialPost, event: PhysicalEvent, spec: JoinSpec, stats: dict | None
) -> bool:
    if spec.method == "string_similarity":
        return _similarity_match(post, event.primary_location_name(), spec, stats)
    if spec.method == "schema_match":
        return all(
            _field_value(post, pf, False) == _field_value(event, ef, True)
            for pf, ef in spec.schema_map
        )
    # natural: equality on the attributes both sides share
    return post.cell == event.cell and _utc_date(post.t) == _utc_date(event.event_time)


def join(
    event: PhysicalEvent,
    candidates: Iterable[SocialPost],
    spec: JoinSpec,
    stats: dict | None = None,
) -> list[SocialPost]:
    """Candidates that match the event under the spec's predicate."""
    out = []
    for post in candidates:
        if spec.require_cell and (post.cell is None or post.cell != event.cell):
            continue
        if spec.keywords and not _keyword_hit(post.p, spec.keywords):
            continue
        if _method_match(post, event, spec, stats):
            out.append(post)
    return out


def match_events(
    events: Sequence[tuple[int, PhysicalEvent]],
    posts: Sequence[SocialPost],
    spec: JoinSpec,
    stats: dict | None = None,
) -> dict[str, int]:
    """Map post_id -> matching event row id, bucketed for speed.

    Posts are grouped by grid cell and time-sorted once; each event then only
    examines the bucket that can possibly match (its own cell when cell
    equality is required), binary-searching the window bounds. A post that
    matches several events keeps the lowest row id.
    """
    matched: dict[str, int] = {}
    if spec.require_cell:
        buckets: dict[tuple[int, int], list[SocialPost]] = {}
        for p in posts:
            if p.cell is not None:
                buckets.setdefault(tuple(p.cell), []).append(p)
        for bucket in buckets.values():
            bucket.sort(key=lambda p: (p.t, p.post_id or ""))
        for row_id, event in sorted(events, key=lambda item: item[0]):
            bucket = buckets.get(tuple(event.cell), [])
            times = [p.t for p in bucket]
            if spec.window == "user":
                lo = event.event_time - int(spec.days_before * ONE_DAY)
                hi = event.event_time + int(spec.days_after * ONE_DAY)
            else:
                lo = event.event_time - spec.dt_seconds
                hi = event.event_time + spec.dt_seconds
            window = bucket[bisect_left(times, lo) : bisect_right(times, hi)]
            if spec.window == "data":
                window = select_window(event, window, spec)
            for post in join(event, window, spec, stats):
                key = post.post_id or ""
                if key not in matched:
                    matched[key] = row_id
    else:
        for row_id, event in sorted(events, key=lambda item: item[0]):
            window = select_window(event, posts, spec)
            for post in join(event, window, spec, stats):
                key = post.post_id or ""
                if key not in matched:
                    matched[key] = row_id
    return matched


def label_stream(
    events: Sequence[tuple[int, PhysicalEvent]],
    posts: Sequence[SocialPost],
    rejects: Sequence[RejectedRecord],
    spec: JoinSpec,
    stats: dict | None = None,
) -> tuple[list[LabeledPost], list[SocialPost]]:
    """Partition the stream into labeled training samples and prediction data.

    Event-matched posts are relevant (evidence: event row id); rejects with
    usable text are irrelevant (evidence: the rejection reason); the rest
    stay unlabeled. The three sets are disjoint and cover the input.
    """
    matched = match_events(events, posts, spec, stats)
    labeled: list[LabeledPost] = []
    unlabeled: list[SocialPost] = []
    for post in posts:
        row_id = matched.get(post.post_id or "")
        if row_id is not None:
            labeled.append(LabeledPost(post, RELEVANT, str(row_id)))
        else:
            unlabeled.append(post)
    for reject in rejects:
        if not reject.text.strip() or reject.approx_t <= 0:
            continue
        pseudo = SocialPost(
            p=reject.text,
            t=reject.approx_t,
            src=reject.src,
            post_id=reject.reject_id,
        )
        labeled.append(LabeledPost(pseudo, IRRELEVANT, f"reject:{reject.reason}"))
    return labeled, unlabeled
