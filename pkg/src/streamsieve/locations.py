"""Location extraction and 2.5-arc-minute grid binning for social posts.

Extraction unions two sources: a gazetteer tokenizer that finds maximal
place-name token sequences in the post text (a deterministic stand-in for
statistical NER), and case-insensitive substring matches against location
strings currently shared in the metadata store. Extracted names feed the
store back with a 2-day TTL, so clean mentions in one post help resolve
mangled mentions (hashtags, fused words) in later posts.

Grid cells split the globe into 2.5-arc-minute bins, 24 per degree:
row = floor((lat + 90) * 24) in [0, 4319], col = floor((lon + 180) * 24)
in [0, 8639], with the upper boundary clamped into range.
"""

from __future__ import annotations

import math
import re
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .staging import LOCATION_STRING, MetadataEntry, MetadataStore

CELLS_PER_DEGREE = 24
N_ROWS = 180 * CELLS_PER_DEGREE
N_COLS = 360 * CELLS_PER_DEGREE

TWO_DAYS = 2 * 86400

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class UnknownPlaceError(KeyError):
    """Name not present in the gazetteer."""


class GridCell(NamedTuple):
    row: int
    col: int


def map_to_cell(lat: float, lon: float) -> GridCell:
    """Bin coordinates into their grid cell; boundary values clamp in-range."""
    if not (-90.0 <= lat <= 90.0):
        raise ValueError(f"latitude out of range: {lat}")
    if not (-180.0 <= lon <= 180.0):
        raise ValueError(f"longitude out of range: {lon}")
    row = min(int(math.floor((lat + 90.0) * CELLS_PER_DEGREE)), N_ROWS - 1)
    col = min(int(math.floor((lon + 180.0) * CELLS_PER_DEGREE)), N_COLS - 1)
    return GridCell(row, col)


def cell_center(cell: GridCell | tuple[int, int]) -> tuple[float, float]:
    row, col = cell
    lat = (row + 0.5) / CELLS_PER_DEGREE - 90.0
    lon = (col + 0.5) / CELLS_PER_DEGREE - 180.0
    return lat, lon


def _fold_tokens(text: str) -> list[tuple[str, int]]:
    """Lowercase word tokens with their character offsets."""
    folded = text.casefold()
    return [(m.group(0), m.start()) for m in _TOKEN_RE.finditer(folded)]


class Gazetteer:
    """Place-name table mapping case-folded names to coordinates.

    File format: TSV lines ``name<TAB>lat<TAB>lon``. Names must be unique
    after case folding.
    """

    def __init__(self, entries: Iterable[tuple[str, float, float]]) -> None:
        self._by_folded: dict[str, tuple[str, float, float]] = {}
        # token-sequence index: first token -> [(token tuple, folded name)]
        self._by_first_token: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for name, lat, lon in entries:
            folded = name.casefold()
            if folded in self._by_folded:
                raise ValueError(f"duplicate gazetteer name after case folding: {name!r}")
            self._by_folded[folded] = (name, float(lat), float(lon))
            tokens = tuple(tok for tok, _ in _fold_tokens(name))
            if not tokens:
                raise ValueError(f"gazetteer name has no tokens: {name!r}")
            self._by_first_token.setdefault(tokens[0], []).append((tokens, folded))
        for seqs in self._by_first_token.values():
            seqs.sort(key=lambda item: (-len(item[0]), item[0]))  # longest first

    def __len__(self) -> int:
        return len(self._by_folded)

    def __contains__(self, name: str) -> bool:
        return name.casefold() in self._by_folded

    def names(self) -> list[str]:
        return sorted(name for name, _, _ in self._by_folded.values())

    def geocode(self, name: str) -> tuple[float, float]:
        """Case-folded exact lookup; unknown names raise UnknownPlaceError."""
        hit = self._by_folded.get(name.casefold())
        if hit is None:
            raise UnknownPlaceError(name)
        return hit[1], hit[2]

    def canonical(self, name: str) -> str:
        hit = self._by_folded.get(name.casefold())
        if hit is None:
            raise UnknownPlaceError(name)
        return hit[0]

    def find_mentions(self, text: str) -> list[tuple[str, int]]:
        """Maximal token-sequence matches as (canonical name, char offset).

        Greedy left to right: at each token position the longest matching
        name wins and consumes its tokens.
        """
        tokens = _fold_tokens(text)
        words = [tok for tok, _ in tokens]
        hits: list[tuple[str, int]] = []
        i = 0
        while i < len(words):
            candidates = self._by_first_token.get(words[i])
            matched = False
            if candidates:
                for seq, folded in candidates:
                    if tuple(words[i : i + len(seq)]) == seq:
                        hits.append((self._by_folded[folded][0], tokens[i][1]))
                        i += len(seq)
                        matched = True
                        break
            if not matched:
                i += 1
        return hits

    @classmethod
    def from_tsv(cls, path: str | Path) -> "Gazetteer":
        entries = []
        with Path(path).open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                entries.append((parts[0], float(parts[1]), float(parts[2])))
        return cls(entries)

    @classmethod
    def bundled(cls) -> "Gazetteer":
        """The sample gazetteer shipped with the package (~1000 places)."""
        ref = resources.files("streamsieve").joinpath("data/gazetteer.tsv")
        with resources.as_file(ref) as path:
            return cls.from_tsv(path)


def extract_locations(
    post,
    gazetteer: Gazetteer,
    mstore: MetadataStore | None = None,
    now: int | None = None,
    ttl: int = TWO_DAYS,
) -> list[str]:
    """Location strings found in a post's text, ordered by first mention.

    Gazetteer mentions are pushed to the metadata store with a 2-day TTL;
    substring hits from the store get their TTL topped up by 2 days when
    under 2 days. Passing ``mstore=None`` disables augmentation and yields
    gazetteer mentions only.
    """
    text = post.p
    now = post.t if now is None else now
    found: dict[str, tuple[str, int]] = {}
    for name, pos in gazetteer.find_mentions(text):
        folded = name.casefold()
        if folded not in found or pos < found[folded][1]:
            found[folded] = (name, pos)
        if mstore is not None:
            mstore.put(
                MetadataEntry(LOCATION_STRING, name, now + ttl), extend_if_below=ttl, now=now
            )
    if mstore is not None:
        folded_text = text.casefold()
        for entry in mstore.lookup_substrings(text, now=now):
            folded = entry.value.casefold()
            pos = folded_text.find(folded)
            if pos < 0:
                continue
            if folded in found:
                prev_name, prev_pos = found[folded]
                if pos < prev_pos:
                    found[folded] = (prev_name, pos)
            else:
                found[folded] = (entry.value, pos)
            mstore.put(
                MetadataEntry(entry.kind, entry.value, now + ttl), extend_if_below=ttl, now=now
            )
    ordered = sorted(found.values(), key=lambda item: (item[1], item[0].casefold()))
    return [name for name, _ in ordered]


_GEOTAG_RE = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*$")


def _candidate_coords(
    candidates: Iterable[str], gazetteer: Gazetteer, stats: dict | None
) -> list[tuple[float, float]]:
    coords = []
    for cand in candidates:
        geotag = _GEOTAG_RE.match(cand)
        if geotag:
            coords.append((float(geotag.group(1)), float(geotag.group(2))))
            continue
        try:
            coords.append(gazetteer.geocode(cand))
        except UnknownPlaceError:
            if stats is not None:
                stats["geocode_misses"] = stats.get("geocode_misses", 0) + 1
    return coords


def resolve_post_cell(
    post,
    gazetteer: Gazetteer,
    mstore: MetadataStore | None = None,
    now: int | None = None,
    stats: dict | None = None,
) -> GridCell | None:
    """The post's grid cell, or None when nothing geocodes.

    Explicit geotags in ``post.l`` win outright. Otherwise text-extracted
    locations are geocoded and grouped by cell; the cell holding the most
    coordinates is chosen, ties broken by the earliest-mentioned location.
    """
    if post.l:
        candidates = list(post.l)
    else:
        candidates = extract_locations(post, gazetteer, mstore=mstore, now=now)
    coords = _candidate_coords(candidates, gazetteer, stats)
    if not coords:
        return None
    counts: dict[GridCell, int] = {}
    first_seen: dict[GridCell, int] = {}
    for idx, (lat, lon) in enumerate(coords):
        cell = map_to_cell(lat, lon)
        counts[cell] = counts.get(cell, 0) + 1
        first_seen.setdefault(cell, idx)
    return max(counts, key=lambda c: (counts[c], -first_seen[c]))


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers (mean earth radius)."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * 6371.0088 * math.asin(min(1.0, math.sqrt(a)))
