import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamsieve.events import PhysicalEvent
from streamsieve.ingest import RejectedRecord, SocialPost
from streamsieve.joins import (
    IRRELEVANT,
    JoinSpec,
    RELEVANT,
    jaccard,
    join,
    label_stream,
    levenshtein,
    levenshtein_ratio,
    match_events,
    select_window,
)
from streamsieve.locations import cell_center, map_to_cell

from oracles import jaccard_brute, join_brute, levenshtein_ratio_brute

DAY = 86400


def make_event(lat=20.15, lon=92.90, t=10 * DAY, names=("Sittwe",)):
    obj = json.dumps([{"location": n} for n in names]).encode()
    return PhysicalEvent(lat=lat, lon=lon, event_time=t, source="noaa", url="NULL", event_obj=obj)


def make_post(pid, text="landslide in sittwe", t=10 * DAY, lat=20.15, lon=92.90, l=("Sittwe",)):
    return SocialPost(p=text, l=list(l), t=t, cell=map_to_cell(lat, lon), post_id=pid)


# ------------------------------------------------------------- similarities


def test_jaccard_examples():
    assert jaccard("landslide in rio", "landslide rio") == pytest.approx(2 / 3)
    assert jaccard("same text", "same text") == 1.0
    assert jaccard("alpha beta", "gamma delta") == 0.0
    assert jaccard("", "") == 1.0
    assert jaccard("Punctuation, stripped!", "punctuation stripped") == 1.0


def test_levenshtein_examples():
    assert levenshtein("mudslide", "landslide") == 3
    assert levenshtein_ratio("mudslide", "landslide") == pytest.approx(2 / 3)
    assert levenshtein_ratio("abc", "abc") == 1.0
    assert levenshtein_ratio("", "abc") == 0.0
    assert levenshtein_ratio("", "") == 1.0


@given(st.text(max_size=12), st.text(max_size=12))
@settings(max_examples=150, deadline=None)
def test_similarities_match_bruteforce(a, b):
    assert jaccard(a, b) == pytest.approx(jaccard_brute(a, b))
    assert levenshtein_ratio(a, b) == pytest.approx(levenshtein_ratio_brute(a, b))


@given(st.text(max_size=10), st.text(max_size=10), st.text(max_size=10))
@settings(max_examples=100, deadline=None)
def test_levenshtein_triangle_inequality(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


# ------------------------------------------------------------------ windows


def test_user_window_boundaries():
    event = make_event(t=10 * DAY)
    spec = JoinSpec(days_before=3, days_after=3)
    inside = make_post("a", t=10 * DAY - 2 * DAY)
    edge = make_post("b", t=10 * DAY - 3 * DAY)
    outside = make_post("c", t=10 * DAY - 4 * DAY)
    after = make_post("d", t=10 * DAY + 3 * DAY + 1)
    got = select_window(event, [inside, edge, outside, after], spec)
    assert [p.post_id for p in got] == ["a", "b"]


def test_data_window_distance_and_time():
    event = make_event(t=10 * DAY)
    spec = JoinSpec(window="data", dist_km=50, dt_seconds=DAY)
    near_cell = map_to_cell(20.15, 92.90)
    clat, clon = cell_center(near_cell)
    near = make_post("near", t=10 * DAY + 6 * 3600, lat=clat, lon=clon)
    far = make_post("far", t=10 * DAY, lat=21.0, lon=94.0)  # ~150 km away
    late = make_post("late", t=10 * DAY + 2 * DAY, lat=clat, lon=clon)
    got = select_window(event, [near, far, late], spec)
    assert [p.post_id for p in got] == ["near"]


# -------------------------------------------------------------------- joins


def test_join_reference_app_conjunction():
    event = make_event()
    spec = JoinSpec(keywords=("landslide", "mudslide"), threshold=0.3)
    same_cell_kw = make_post("a", text="landslide in sittwe")
    same_cell_no_kw = make_post("b", text="flooding in sittwe")
    other_cell = make_post("c", text="landslide in oslo", lat=59.91, lon=10.75, l=("Oslo",))
    got = join(event, [same_cell_kw, same_cell_no_kw, other_cell], spec)
    assert [p.post_id for p in got] == ["a"]


def test_join_similarity_example():
    # {rio, de, janeiro} vs {rio}: 1/3 > 0.3
    event = make_event(names=("Rio",))
    spec = JoinSpec(threshold=0.3, require_cell=False)
    post = make_post("a", text="slide", l=("Rio de Janeiro",))
    assert join(event, [post], spec) == [post]
    spec_strict = JoinSpec(threshold=0.34, require_cell=False)
    assert join(event, [post], spec_strict) == []


def test_join_natural_requires_same_utc_date():
    event = make_event(t=10 * DAY + 3600)
    spec = JoinSpec(method="natural")
    same_day = make_post("a", t=10 * DAY + 7200)
    next_day = make_post("b", t=11 * DAY + 7200)
    got = join(event, [same_day, next_day], spec)
    assert [p.post_id for p in got] == ["a"]


def test_join_schema_match_and_load_time_rejection():
    event = make_event()
    spec = JoinSpec(method="schema_match", schema_map=(("cell", "cell"), ("date", "date")))
    same = make_post("a", t=10 * DAY + 100)
    other_day = make_post("b", t=12 * DAY)
    assert [p.post_id for p in join(event, [same, other_day], spec)] == ["a"]
    with pytest.raises(ValueError, match="unmapped"):
        JoinSpec(method="schema_match", schema_map=(("nope", "cell"),))


def test_threshold_monotonicity():
    rng = np.random.default_rng(5)
    event = make_event(names=("Sittwe region",))
    posts = [
        make_post(f"p{i}", l=(" ".join(rng.choice(["sittwe", "region", "north", "valley"], size=2)),))
        for i in range(30)
    ]
    prev = None
    for threshold in (0.1, 0.3, 0.5, 0.7, 0.9):
        spec = JoinSpec(threshold=threshold)
        got = {p.post_id for p in join(event, posts, spec)}
        if prev is not None:
            assert got <= prev
        prev = got


def test_window_containment_data_within_user():
    rng = np.random.default_rng(6)
    event = make_event(t=10 * DAY)
    posts = []
    for i in range(50):
        t = 10 * DAY + int(rng.integers(-4 * DAY, 4 * DAY))
        posts.append(make_post(f"p{i}", t=t))
    user_spec = JoinSpec(window="user", days_before=3, days_after=3, threshold=0.3)
    data_spec = JoinSpec(window="data", dist_km=50, dt_seconds=2 * DAY, threshold=0.3)
    user_out = {p.post_id for p in join(event, select_window(event, posts, user_spec), user_spec)}
    data_out = {p.post_id for p in join(event, select_window(event, posts, data_spec), data_spec)}
    assert data_out <= user_out


# ------------------------------------------------------------ label stream


def test_label_stream_partition_counts():
    event = make_event()
    posts = [make_post(f"m{i}") for i in range(4)]
    posts += [
        make_post(f"u{i}", text="unrelated chatter", l=("Oslo",), lat=59.91, lon=10.75)
        for i in range(76)
    ]
    rejects = [RejectedRecord(f"reject text {i}", "missing timestamp", 10 * DAY, "twitter", f"r{i}") for i in range(20)]
    spec = JoinSpec(keywords=("landslide",), threshold=0.3)
    labeled, unlabeled = label_stream([(0, event)], posts, rejects, spec)
    relevant = [lp for lp in labeled if lp.label == RELEVANT]
    irrelevant = [lp for lp in labeled if lp.label == IRRELEVANT]
    assert (len(relevant), len(irrelevant), len(unlabeled)) == (4, 20, 76)
    assert all(lp.evidence == "0" for lp in relevant)
    assert all(lp.evidence.startswith("reject:") for lp in irrelevant)
    labeled_ids = {lp.post.post_id for lp in relevant} | {p.post_id for p in unlabeled}
    assert labeled_ids == {p.post_id for p in posts}  # partition covers all posts


def test_label_stream_no_events_no_relevant():
    posts = [make_post("a"), make_post("b")]
    labeled, unlabeled = label_stream([], posts, [], JoinSpec(keywords=("landslide",)))
    assert labeled == [] and len(unlabeled) == 2


def test_label_stream_all_matched_leaves_none_unlabeled():
    event = make_event()
    posts = [make_post(f"m{i}") for i in range(5)]
    labeled, unlabeled = label_stream([(3, event)], posts, [], JoinSpec(keywords=("landslide",)))
    assert len(labeled) == 5 and unlabeled == []


def test_rejects_without_text_or_time_are_skipped():
    rejects = [
        RejectedRecord("", "missing text", 100, "twitter"),
        RejectedRecord("usable", "missing timestamp", 0, "twitter"),
        RejectedRecord("good one", "missing timestamp", 100, "twitter"),
    ]
    labeled, _ = label_stream([], [], rejects, JoinSpec())
    assert [lp.post.p for lp in labeled] == ["good one"]


# --------------------------------------------------- bucketed vs brute force


def _random_instance(rng, n_posts, n_events):
    places = [
        ("Sittwe", 20.15, 92.90),
        ("Bogota", 4.71, -74.07),
        ("Oslo", 59.91, 10.75),
        ("Quito", -0.18, -78.47),
        ("Lima", -12.05, -77.04),
    ]
    events = []
    for row_id in range(n_events):
        name, lat, lon = places[int(rng.integers(len(places)))]
        t = int(rng.integers(5 * DAY, 25 * DAY))
        events.append((row_id, make_event(lat=lat, lon=lon, t=t, names=(name,))))
    posts = []
    for i in range(n_posts):
        name, lat, lon = places[int(rng.integers(len(places)))]
        t = int(rng.integers(0, 30 * DAY))
        text = str(rng.choice([f"landslide near {name.lower()}", f"visiting {name.lower()} today"]))
        posts.append(make_post(f"p{i:05d}", text=text, t=t, lat=lat, lon=lon, l=(name,)))
    return events, posts


@pytest.mark.parametrize("method", ["string_similarity", "natural", "schema_match"])
def test_match_events_equals_bruteforce(method):
    rng = np.random.default_rng(99)
    spec = JoinSpec(method=method, keywords=("landslide",), threshold=0.3)
    for _ in range(10):
        events, posts = _random_instance(rng, int(rng.integers(30, 150)), int(rng.integers(2, 8)))
        got = match_events(events, posts, spec)
        want = join_brute(events, posts, spec)
        want_first = {}
        for row_id, pid in sorted(want):
            want_first.setdefault(pid, row_id)
        assert got == want_first
