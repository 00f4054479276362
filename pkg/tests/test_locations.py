import numpy as np
import pytest

from streamsieve.ingest import SocialPost
from streamsieve.locations import (
    GridCell,
    UnknownPlaceError,
    cell_center,
    extract_locations,
    map_to_cell,
    resolve_post_cell,
)
from streamsieve.staging import EVENT_LOCATION, ManualClock, MetadataEntry, MetadataStore

DAY = 86400


def test_grid_examples():
    assert map_to_cell(0, 0) == GridCell(2160, 4320)
    assert map_to_cell(-90, -180) == GridCell(0, 0)
    # 0.05 deg * 24 cells/deg = 1.2 -> one cell past the origin cell
    assert map_to_cell(0.05, 0.05) == GridCell(2161, 4321)


def test_grid_boundaries_clamp_in_range():
    assert map_to_cell(90, 180) == GridCell(4319, 8639)
    assert map_to_cell(90, -180) == GridCell(4319, 0)
    assert map_to_cell(-90, 180) == GridCell(0, 8639)


def test_grid_rejects_out_of_range():
    with pytest.raises(ValueError):
        map_to_cell(90.01, 0)
    with pytest.raises(ValueError):
        map_to_cell(0, -180.5)


def test_cell_center_inverts_mapping():
    rng = np.random.default_rng(42)
    rows = rng.integers(0, 4320, size=2000)
    cols = rng.integers(0, 8640, size=2000)
    for row, col in zip(rows, cols):
        lat, lon = cell_center(GridCell(int(row), int(col)))
        assert map_to_cell(lat, lon) == (row, col)


def test_geocode_exact_case_folded(small_gazetteer):
    assert small_gazetteer.geocode("Sittwe") == (20.15, 92.90)
    assert small_gazetteer.geocode("sittwe") == (20.15, 92.90)
    with pytest.raises(UnknownPlaceError):
        small_gazetteer.geocode("Zzxyq")


def test_gazetteer_rejects_casefold_duplicates():
    from streamsieve.locations import Gazetteer

    with pytest.raises(ValueError, match="duplicate"):
        Gazetteer([("Oslo", 1, 2), ("OSLO", 3, 4)])


def test_ner_longest_match_wins(small_gazetteer):
    hits = small_gazetteer.find_mentions("Flooding in Rio de Janeiro and Oslo today")
    assert [name for name, _ in hits] == ["Rio de Janeiro", "Oslo"]


def test_extract_locations_gazetteer_hit_feeds_mstore(small_gazetteer):
    ms = MetadataStore(clock=ManualClock(0))
    post = SocialPost(p="mudslide hits Sittwe region", t=1000)
    assert extract_locations(post, small_gazetteer, mstore=ms) == ["Sittwe"]
    entry = ms.get("Sittwe", now=1000)
    assert entry is not None and entry.expires_at == 1000 + 2 * DAY


def test_extract_locations_empty_cases(small_gazetteer):
    ms = MetadataStore(clock=ManualClock(0))
    post = SocialPost(p="no places mentioned here", t=1000)
    assert extract_locations(post, small_gazetteer, mstore=ms) == []
    assert extract_locations(post, small_gazetteer) == []


def test_extract_locations_substring_augmentation(small_gazetteer):
    ms = MetadataStore(clock=ManualClock(0))
    ms.put(MetadataEntry(EVENT_LOCATION, "Bogota", 500 + DAY, created_at=500), now=500)
    post = SocialPost(p="mudslide near #bogotaAlert now", t=1000)
    assert extract_locations(post, small_gazetteer) == []  # token fused, NER misses
    assert extract_locations(post, small_gazetteer, mstore=ms) == ["Bogota"]
    # substring hit under 2 days left got extended by 2 days
    assert ms.get("Bogota", now=1000).expires_at == 500 + DAY + 2 * DAY


def test_extract_orders_by_first_mention(small_gazetteer):
    post = SocialPost(p="Oslo first then Sittwe", t=1000)
    assert extract_locations(post, small_gazetteer) == ["Oslo", "Sittwe"]


def test_resolve_majority_cell(small_gazetteer):
    # Rio de Janeiro and Rio Branco are in different cells; two mentions of
    # the former win
    post = SocialPost(p="Rio de Janeiro slide, Rio Branco fine, Rio de Janeiro again", t=10)
    cell = resolve_post_cell(post, small_gazetteer)
    assert cell == map_to_cell(-22.91, -43.17)


def test_resolve_single_location(small_gazetteer):
    post = SocialPost(p="Sittwe hillside collapsed", t=10)
    assert resolve_post_cell(post, small_gazetteer) == map_to_cell(20.15, 92.90)


def test_resolve_tie_breaks_by_earliest_mention(small_gazetteer):
    post = SocialPost(p="Quito and then Oslo", t=10)
    assert resolve_post_cell(post, small_gazetteer) == map_to_cell(-0.18, -78.47)
    post2 = SocialPost(p="Oslo and then Quito", t=10)
    assert resolve_post_cell(post2, small_gazetteer) == map_to_cell(59.91, 10.75)


def test_resolve_geotag_wins(small_gazetteer):
    post = SocialPost(p="Oslo text ignored", l=["12.97,77.59"], t=10)
    assert resolve_post_cell(post, small_gazetteer) == map_to_cell(12.97, 77.59)


def test_resolve_none_when_nothing_geocodes(small_gazetteer):
    stats = {}
    post = SocialPost(p="nothing here", l=["Atlantis"], t=10)
    assert resolve_post_cell(post, small_gazetteer, stats=stats) is None
    assert stats["geocode_misses"] == 1


def test_augmentation_never_decreases_resolutions(small_gazetteer):
    """With a fixed post set, adding metadata entries only adds resolutions."""
    posts = [
        SocialPost(p="mudslide #sittweAlert today", t=100),
        SocialPost(p="Sittwe road closed", t=200),
        SocialPost(p="#bogotaNews flooding", t=300),
        SocialPost(p="sunny in Oslo", t=400),
    ]

    def resolved_count(mstore):
        return sum(
            1
            for p in posts
            if resolve_post_cell(
                SocialPost(p=p.p, t=p.t), small_gazetteer, mstore=mstore, now=p.t
            )
            is not None
        )

    bare = resolved_count(None)
    ms = MetadataStore(clock=ManualClock(0))
    with_store = resolved_count(ms)
    assert with_store >= bare
    ms2 = MetadataStore(clock=ManualClock(0))
    ms2.put(MetadataEntry(EVENT_LOCATION, "Sittwe", 50 + 7 * DAY, created_at=50), now=50)
    ms2.put(MetadataEntry(EVENT_LOCATION, "Bogota", 50 + 7 * DAY, created_at=50), now=50)
    assert resolved_count(ms2) >= with_store
    assert resolved_count(ms2) == 4  # both fused mentions now resolve
