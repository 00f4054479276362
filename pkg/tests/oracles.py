"""Independent brute-force reference implementations used by the tests.

These deliberately re-derive results from first principles (nested loops,
direct formulas) instead of calling the library's fast paths, so agreement
is meaningful.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone

ONE_DAY = 86400
EARTH_RADIUS_KM = 6371.0088


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def template_matches(pattern_fields, key_fields) -> bool:
    return all(p == "*" or p == k for p, k in zip(pattern_fields, key_fields))


# ---------------------------------------------------------------- event rules


def rule_matches_brute(records, config):
    """(kind, value, lat, lon, t, tagged) tuples -> set of full matches.

    Returns frozensets of (rule_id, seed index). Conjunct evaluation scans
    all records per seed, with no clustering index.
    """
    out = set()
    recs = list(records)
    for i, seed in enumerate(recs):
        kind = seed["kind"]
        near = [
            r
            for r in recs
            if haversine_km(seed["lat"], seed["lon"], r["lat"], r["lon"]) <= config.proximity_km
        ]

        def rain_within(days):
            return any(
                r["kind"] == "rain"
                and r["value"] > config.rain_min_mm
                and seed["t"] <= r["t"] <= seed["t"] + days * ONE_DAY
                for r in near
            )

        if kind == "noaa_prediction":
            quake_minor = any(
                r["kind"] == "quake"
                and r["value"] > config.quake_minor
                and seed["t"] <= r["t"] <= seed["t"] + config.quake_lookahead_days * ONE_DAY
                for r in near
            )
            branch = rain_within(config.rain_lookahead_days) or (
                quake_minor and rain_within(config.rain_lookahead_days)
            )
            if seed["value"] > config.noaa_high and branch:
                out.add(("R1", i))
        elif kind == "quake":
            noaa_low = any(
                r["kind"] == "noaa_prediction" and r["value"] > config.noaa_low for r in near
            )
            if (
                seed["value"] > config.quake_major
                and rain_within(config.rain_lookahead_days)
                and noaa_low
            ):
                out.add(("R2", i))
            if seed["value"] > config.quake_severe and rain_within(config.rain_lookahead_days):
                out.add(("R3", i))
        elif kind == "news":
            if seed["tagged"]:
                out.add(("R4", i))
    return out


# ----------------------------------------------------------------- hdi joins


def _utc_date(t):
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%d")


def _tokens(s):
    out, cur = set(), []
    for ch in s.casefold():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.add("".join(cur))
            cur = []
    if cur:
        out.add("".join(cur))
    return out


def jaccard_brute(a, b):
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


def levenshtein_brute(a, b):
    rows = len(a) + 1
    cols = len(b) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j] + 1, dist[i][j - 1] + 1, dist[i - 1][j - 1] + cost
            )
    return dist[rows - 1][cols - 1]


def levenshtein_ratio_brute(a, b):
    longest = max(len(a), len(b))
    return 1.0 if longest == 0 else 1.0 - levenshtein_brute(a, b) / longest


def join_brute(events, posts, spec, counter=None):
    """All-pairs join: set of (row_id, post_id). ``counter`` counts similarity
    evaluations (one per post location string compared)."""
    matched = set()
    for row_id, event in events:
        for post in posts:
            if spec.window == "user":
                lo = event.event_time - int(spec.days_before * ONE_DAY)
                hi = event.event_time + int(spec.days_after * ONE_DAY)
                in_window = lo <= post.t <= hi
            else:
                if post.cell is None:
                    in_window = False
                else:
                    clat = (post.cell[0] + 0.5) / 24 - 90.0
                    clon = (post.cell[1] + 0.5) / 24 - 180.0
                    in_window = (
                        abs(post.t - event.event_time) <= spec.dt_seconds
                        and haversine_km(event.lat, event.lon, clat, clon) <= spec.dist_km
                    )
            if not in_window:
                continue
            cell_ok = not spec.require_cell or (
                post.cell is not None and tuple(post.cell) == tuple(event.cell)
            )
            kw_ok = not spec.keywords or any(
                k.casefold() in post.p.casefold() for k in spec.keywords
            )
            if spec.method == "string_similarity":
                # naive order: the similarity predicate runs on every pair in
                # the window, before any cheap equality filters
                fn = jaccard_brute if spec.similarity_fn == "jaccard" else levenshtein_ratio_brute
                names = post.l if spec.compare_all_locations else post.l[:1]
                best = 0.0
                for name in names:
                    if counter is not None:
                        counter["sim_evals"] = counter.get("sim_evals", 0) + 1
                    best = max(best, fn(name, event.primary_location_name()))
                ok = best > spec.threshold and cell_ok and kw_ok
            elif not cell_ok or not kw_ok:
                ok = False
            elif spec.method == "natural":
                ok = (
                    post.cell is not None
                    and tuple(post.cell) == tuple(event.cell)
                    and _utc_date(post.t) == _utc_date(event.event_time)
                )
            else:
                ok = True
                for pf, ef in spec.schema_map:
                    pv = getattr(post, pf) if pf != "date" else _utc_date(post.t)
                    ev = getattr(event, ef) if ef != "date" else _utc_date(event.event_time)
                    if pf == "cell":
                        pv = tuple(pv) if pv is not None else None
                    if ef == "cell":
                        ev = tuple(ev)
                    if pv != ev:
                        ok = False
                        break
            if ok:
                matched.add((row_id, post.post_id))
    return matched


def variance_two_pass(values) -> float:
    values = list(values)
    if not values:
        return 0.0
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)
