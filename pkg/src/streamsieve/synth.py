"""Synthetic paired social / high-confidence streams with controllable drift.

Events are modeled as mixtures of token-pool signals whose coefficients can
change at scheduled windows; post text is sampled from a bigram language
model conditioned on the previous token, a user group, a location group,
and the window index. Each planted event gets a burst of relevant posts
near its place shortly after it happens, plus high-confidence records
(prediction + rain, severe quake + rain, or a tagged news item) delayed by
the high-confidence latency so the event rules fire. Everything else is
confuser chatter, part of which shares the topic keyword (the election /
song senses), and a slice of the raw stream is malformed (missing
timestamp) so the streamer's reject pool exists.

Output files (newline JSON, time-sorted): the social stream in the raw
streamer schema, the high-confidence stream, and ``truth.jsonl`` rows
``{"post_id", "label", "event_id"}``. Generation is fully deterministic
per seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .locations import Gazetteer

ONE_DAY = 86400

RELEVANT_POOL_NAMES = ("core", "era_a", "era_b")

DEFAULT_RELEVANT_POOLS = {
    "core": (
        "debris", "buried", "hillside", "collapsed", "rescue", "evacuated",
        "villagers", "rubble", "casualties", "slope", "destroyed", "homes",
    ),
    "era_a": ("mudflow", "washout", "embankment", "slopefail", "gully", "subsidence"),
    "era_b": ("earthflow", "slipzone", "hillcollapse", "terracefall", "mudrush", "scarp"),
}

DEFAULT_CONFUSER_POOLS = {
    "election": (
        "election", "votes", "victory", "poll", "campaign", "ballot",
        "winner", "margin", "county", "rally", "landslide",
    ),
    "music": (
        "song", "guitar", "cover", "album", "lyrics", "classic",
        "concert", "playlist", "landslide",
    ),
    "generic": (
        "coffee", "morning", "traffic", "weather", "game", "photo",
        "weekend", "friends", "lunch", "deadline",
    ),
}

FUSED_SUFFIXES = ("alert", "now", "news", "updates")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class SignalProfile:
    """Named token pools plus per-window mixture coefficients.

    ``drift_plan`` entries are (window index, coefficient vector); the plan
    applies from that window on. Coefficients must sum to 1 per window.
    """

    pools: tuple[tuple[str, tuple[str, ...]], ...]
    base_coeffs: tuple[float, ...]
    drift_plan: tuple[tuple[int, tuple[float, ...]], ...] = ()

    def __post_init__(self) -> None:
        self._check(self.base_coeffs)
        last = 0
        for window, coeffs in self.drift_plan:
            if window <= last:
                raise ProfileError("drift plan windows must be strictly increasing")
            last = window
            self._check(coeffs)

    def _check(self, coeffs: Sequence[float]) -> None:
        if len(coeffs) != len(self.pools):
            raise ProfileError("one coefficient per pool required")
        if any(c < 0 for c in coeffs):
            raise ProfileError("coefficients must be non-negative")
        if abs(sum(coeffs) - 1.0) > 1e-9:
            raise ProfileError(f"coefficients must sum to 1, got {sum(coeffs)}")

    def coeffs_at(self, window: int) -> tuple[float, ...]:
        coeffs = self.base_coeffs
        for plan_window, plan_coeffs in self.drift_plan:
            if window >= plan_window:
                coeffs = plan_coeffs
        return coeffs

    def token_distribution(self, window: int) -> dict[str, float]:
        """Mixture unigram distribution at a window (the tilt-free marginal)."""
        dist: dict[str, float] = {}
        for (name, tokens), coeff in zip(self.pools, self.coeffs_at(window)):
            for tok in tokens:
                dist[tok] = dist.get(tok, 0.0) + coeff / len(tokens)
        return dist


def default_relevant_profile(drift_window: int | None = 5) -> SignalProfile:
    pools = tuple((name, DEFAULT_RELEVANT_POOLS[name]) for name in RELEVANT_POOL_NAMES)
    plan = ()
    if drift_window is not None:
        plan = ((drift_window, (0.4, 0.0, 0.6)),)
    return SignalProfile(pools, (0.4, 0.6, 0.0), plan)


def default_confuser_profile(drift_window: int | None = 5) -> SignalProfile:
    pools = tuple((name, DEFAULT_CONFUSER_POOLS[name]) for name in sorted(DEFAULT_CONFUSER_POOLS))
    plan = ()
    if drift_window is not None:
        plan = ((drift_window, (0.55, 0.25, 0.2)),)
    return SignalProfile(pools, (0.3, 0.45, 0.25), plan)


class SynthLanguageModel:
    """Bigram language model over a signal profile.

    The next-token distribution starts from the window's mixture and is
    multiplicatively tilted per (previous token, user group, location group,
    window) context, then renormalized; tilt strength 0 reproduces the
    mixture marginal exactly. Distributions are deterministic for a seed.
    """

    def __init__(self, profile: SignalProfile, tilt: float = 0.3, seed: int = 0) -> None:
        if not (0.0 <= tilt < 1.0):
            raise ProfileError("tilt must be in [0, 1)")
        self.profile = profile
        self.tilt = tilt
        self.seed = seed
        self._cache: dict[tuple, tuple[list[str], np.ndarray]] = {}

    def _tilt_factor(self, context: str) -> float:
        digest = hashlib.blake2b(
            context.encode("utf-8"), digest_size=8, key=self.seed.to_bytes(8, "little")
        ).digest()
        unit = int.from_bytes(digest, "little") / 2**64  # [0, 1)
        return 1.0 + self.tilt * (2.0 * unit - 1.0)

    def distribution(
        self, prev: str | None, user_group: int, loc_group: int, window: int
    ) -> tuple[list[str], np.ndarray]:
        key = (prev, user_group, loc_group, window)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        base = self.profile.token_distribution(window)
        tokens = sorted(base)
        probs = np.array(
            [
                base[tok]
                * self._tilt_factor(f"{prev}|{tok}|{user_group}|{loc_group}|{window}")
                for tok in tokens
            ]
        )
        probs /= probs.sum()
        self._cache[key] = (tokens, probs)
        return tokens, probs

    def sample_tokens(
        self,
        rng: np.random.Generator,
        n: int,
        user_group: int,
        loc_group: int,
        window: int,
    ) -> list[str]:
        out: list[str] = []
        prev: str | None = None
        for _ in range(n):
            tokens, probs = self.distribution(prev, user_group, loc_group, window)
            prev = tokens[rng.choice(len(tokens), p=probs)]
            out.append(prev)
        return out


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_windows: int = 12
    posts_per_window: int = 600
    window_seconds: int = 7 * ONE_DAY
    start_time: int = 1_600_000_000
    events_per_window: int = 3
    posts_per_event: tuple[int, int] = (6, 10)
    hc_latency: int = ONE_DAY
    social_latency: int = 6 * 3600
    keywords: tuple[str, ...] = ("landslide", "mudslide", "rockslide")
    keyword_rate: float = 0.5
    fused_rate: float = 0.3
    rejects_per_window: int = 45
    irrelevant_place_rate: float = 0.5
    stray_hc_per_window: int = 2
    user_groups: int = 4
    location_groups: int = 8
    tilt: float = 0.3
    drift_window: int | None = 5
    relevant_profile: SignalProfile | None = None
    confuser_profile: SignalProfile | None = None

    def __post_init__(self) -> None:
        if self.social_latency >= self.hc_latency:
            raise ProfileError("social latency must be below high-confidence latency")
        if self.n_windows < 1 or self.posts_per_window < 1:
            raise ProfileError("need at least one window and one post per window")
        if self.drift_window is not None and not (1 <= self.drift_window <= self.n_windows):
            raise ProfileError("drift window outside the run")

    def profiles(self) -> tuple[SignalProfile, SignalProfile]:
        rel = self.relevant_profile or default_relevant_profile(self.drift_window)
        conf = self.confuser_profile or default_confuser_profile(self.drift_window)
        return rel, conf


@dataclass(frozen=True)
class PlantedEvent:
    event_id: str
    window: int
    place: str
    lat: float
    lon: float
    t: int
    rule: str


@dataclass
class SynthResult:
    social_path: Path
    hc_path: Path
    truth_path: Path
    events: list[PlantedEvent]
    counts: dict[str, int]


def _loc_group(place: str, n_groups: int) -> int:
    digest = hashlib.blake2b(place.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little") % n_groups


def _single_token_places(gazetteer: Gazetteer) -> list[str]:
    return [name for name in gazetteer.names() if " " not in name]


def generate(config: SynthConfig, out_dir: str | Path, gazetteer: Gazetteer | None = None) -> SynthResult:
    """Write social.jsonl, hc.jsonl and truth.jsonl under out_dir."""
    gaz = gazetteer or Gazetteer.bundled()
    rel_profile, conf_profile = config.profiles()
    lm_rel = SynthLanguageModel(rel_profile, tilt=config.tilt, seed=config.seed)
    lm_conf = SynthLanguageModel(conf_profile, tilt=config.tilt, seed=config.seed + 1)
    rng = np.random.default_rng(config.seed)
    event_places = _single_token_places(gaz)
    all_places = gaz.names()

    social_rows: list[tuple[int, dict, str | None, str | None]] = []  # (t, raw, label, event_id)
    reject_rows: list[tuple[int, dict]] = []
    hc_rows: list[tuple[int, dict]] = []
    events: list[PlantedEvent] = []

    for w in range(1, config.n_windows + 1):
        w_start = config.start_time + (w - 1) * config.window_seconds
        w_end = w_start + config.window_seconds
        relevant_count = 0

        picks = rng.choice(len(event_places), size=config.events_per_window, replace=False)
        for k, place_idx in enumerate(picks):
            place = event_places[int(place_idx)]
            lat, lon = gaz.geocode(place)
            t_event = w_start + int(rng.uniform(0.3, 2.0) * ONE_DAY)
            rule = str(rng.choice(["R1", "R1", "R3", "R4"]))
            event_id = f"ev-w{w:02d}-{k}"
            events.append(PlantedEvent(event_id, w, place, lat, lon, t_event, rule))

            t_hc = t_event + config.hc_latency + int(rng.uniform(0, 0.2 * config.hc_latency))
            if rule == "R1":
                hc_rows.append(
                    (t_hc, {"kind": "noaa_prediction", "value": round(0.72 + 0.25 * rng.random(), 3),
                            "location": place, "t": t_hc, "agency": "noaa"})
                )
                t_rain = t_hc + int(rng.uniform(0.2, 1.5) * ONE_DAY)
                hc_rows.append(
                    (t_rain, {"kind": "rain", "value": round(5 + 40 * rng.random(), 1),
                              "location": place, "t": t_rain, "agency": "usgs"})
                )
            elif rule == "R3":
                hc_rows.append(
                    (t_hc, {"kind": "quake", "value": round(7.05 + 0.9 * rng.random(), 2),
                            "location": place, "t": t_hc, "agency": "usgs"})
                )
                t_rain = t_hc + int(rng.uniform(0.2, 1.5) * ONE_DAY)
                hc_rows.append(
                    (t_rain, {"kind": "rain", "value": round(5 + 40 * rng.random(), 1),
                              "location": place, "t": t_rain, "agency": "usgs"})
                )
            else:
                tag = str(rng.choice(["landslide", "mudslide"]))
                hc_rows.append(
                    (t_hc, {"kind": "news", "value": f"{tag} reported near {place} after heavy rain",
                            "location": place, "t": t_hc, "agency": "news",
                            "link": f"https://news.example/{event_id}"})
                )

            n_rel = int(rng.integers(config.posts_per_event[0], config.posts_per_event[1] + 1))
            relevant_count += n_rel
            loc_group = _loc_group(place, config.location_groups)
            for _ in range(n_rel):
                t_post = t_event + int(rng.uniform(60, config.social_latency))
                user_group = int(rng.integers(config.user_groups))
                tokens = lm_rel.sample_tokens(
                    rng, int(rng.integers(6, 13)), user_group, loc_group, w
                )
                if rng.random() < config.fused_rate:
                    mention = f"#{place}{rng.choice(FUSED_SUFFIXES)}"
                else:
                    mention = place
                tokens.insert(int(rng.integers(len(tokens) + 1)), mention)
                if rng.random() < config.keyword_rate:
                    kw = str(rng.choice(config.keywords))
                    tokens.insert(int(rng.integers(len(tokens) + 1)), kw)
                social_rows.append(
                    (t_post,
                     {"text": " ".join(tokens), "t": t_post, "user": f"user{user_group}",
                      "src": "twitter", "links": []},
                     "relevant", event_id)
                )

        n_irr = max(0, config.posts_per_window - relevant_count)
        for _ in range(n_irr):
            t_post = w_start + int(rng.uniform(0, config.window_seconds - 1))
            user_group = int(rng.integers(config.user_groups))
            if rng.random() < config.irrelevant_place_rate:
                place = all_places[int(rng.integers(len(all_places)))]
                loc_group = _loc_group(place, config.location_groups)
            else:
                place = None
                loc_group = int(rng.integers(config.location_groups))
            tokens = lm_conf.sample_tokens(rng, int(rng.integers(6, 13)), user_group, loc_group, w)
            if place is not None:
                tokens.insert(int(rng.integers(len(tokens) + 1)), place)
            social_rows.append(
                (t_post,
                 {"text": " ".join(tokens), "t": t_post, "user": f"user{user_group}",
                  "src": "twitter", "links": []},
                 "irrelevant", None)
            )

        for _ in range(config.rejects_per_window):
            t_hidden = w_start + int(rng.uniform(0, config.window_seconds - 1))
            user_group = int(rng.integers(config.user_groups))
            loc_group = int(rng.integers(config.location_groups))
            tokens = lm_conf.sample_tokens(rng, int(rng.integers(6, 13)), user_group, loc_group, w)
            reject_rows.append(
                (t_hidden,
                 {"text": " ".join(tokens), "user": f"user{user_group}", "src": "twitter"})
            )

        for _ in range(config.stray_hc_per_window):
            place = all_places[int(rng.integers(len(all_places)))]
            t_hc = w_start + int(rng.uniform(0, config.window_seconds - ONE_DAY))
            hc_rows.append(
                (t_hc, {"kind": "noaa_prediction", "value": round(0.72 + 0.2 * rng.random(), 3),
                        "location": place, "t": t_hc, "agency": "noaa"})
            )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    social_path = out / "social.jsonl"
    hc_path = out / "hc.jsonl"
    truth_path = out / "truth.jsonl"

    # Interleave valid posts and rejects by time, then assign ids in file order.
    merged: list[tuple[int, int, dict, str | None, str | None]] = []
    for i, (t, raw, label, event_id) in enumerate(social_rows):
        merged.append((t, i, raw, label, event_id))
    for i, (t, raw) in enumerate(reject_rows):
        merged.append((t, len(social_rows) + i, raw, None, None))
    merged.sort(key=lambda item: (item[0], item[1]))

    truth_rows = []
    n_valid = n_reject = 0
    with social_path.open("w", encoding="utf-8") as fh:
        for seq, (t, _, raw, label, event_id) in enumerate(merged):
            raw = dict(raw)
            if label is None:
                raw["post_id"] = f"r{seq:06d}"
                n_reject += 1
            else:
                raw["post_id"] = f"p{seq:06d}"
                raw["url"] = f"https://social.example/p{seq:06d}"
                truth_rows.append(
                    {"post_id": raw["post_id"], "label": label, "event_id": event_id}
                )
                n_valid += 1
            fh.write(json.dumps(raw, sort_keys=True) + "\n")

    hc_rows.sort(key=lambda item: item[0])
    with hc_path.open("w", encoding="utf-8") as fh:
        for _, raw in hc_rows:
            fh.write(json.dumps(raw, sort_keys=True) + "\n")

    with truth_path.open("w", encoding="utf-8") as fh:
        for row in truth_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    counts = {
        "windows": config.n_windows,
        "posts": n_valid,
        "rejects": n_reject,
        "relevant": sum(1 for r in truth_rows if r["label"] == "relevant"),
        "hc_records": len(hc_rows),
        "events": len(events),
    }
    return SynthResult(social_path, hc_path, truth_path, events, counts)


def load_truth(path: str | Path) -> dict[str, dict]:
    rows = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                rows[row["post_id"]] = row
    return rows


def truth_metrics(
    predicted: Mapping[str, int] | Iterable[tuple[str, int]],
    truth: str | Path | Mapping[str, dict],
) -> tuple[float, float, float]:
    """Precision, recall and f-score of predicted labels against ground truth.

    ``predicted`` maps post_id -> 1 (relevant) / 0 (irrelevant) and is scored
    over exactly those ids; unknown ids are an error. Zero denominators give
    0 by convention.
    """
    if not isinstance(predicted, Mapping):
        predicted = dict(predicted)
    rows = load_truth(truth) if isinstance(truth, (str, Path)) else truth
    tp = fp = fn = 0
    for post_id, label in predicted.items():
        row = rows.get(post_id)
        if row is None:
            raise ValueError(f"predicted id not in truth: {post_id!r}")
        actual = 1 if row["label"] == "relevant" else 0
        if label and actual:
            tp += 1
        elif label and not actual:
            fp += 1
        elif not label and actual:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    fscore = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, fscore
