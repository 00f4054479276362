import threading

import pytest
from hypothesis import given, settings, strategies as st

from streamsieve.staging import (
    AckError,
    DuplicateKeyError,
    KeyTemplate,
    LOCATION_STRING,
    ManualClock,
    MetadataEntry,
    MetadataStore,
    StagingKey,
    StagingStore,
    TemplateError,
    UnknownImporterError,
)

from oracles import template_matches

DAY = 86400

EXAMPLE_RAW = "ss:en:landslides:Twitter:https://t.co/abc123:7656:1550244443"


def mk_key(i=0, streamer="ss", lang="en", topic="landslides", src="Twitter", url="NULL", t=1000):
    return StagingKey(streamer, lang, topic, src, url, i, t)


def test_key_roundtrip_with_url_colons():
    key = StagingKey.parse(EXAMPLE_RAW)
    assert key.src == "Twitter"
    assert key.url == "https://t.co/abc123"
    assert key.id == 7656
    assert key.serialize() == EXAMPLE_RAW


def test_key_rejects_wrong_field_count():
    with pytest.raises(TemplateError, match="2 fields"):
        StagingKey.parse("ss:en")


def test_template_wrong_field_count_reports_count():
    store = StagingStore()
    with pytest.raises(TemplateError, match="2 fields, expected 7"):
        store.register_template("x", "import", "ss:en")


def test_registration_idempotent():
    store = StagingStore()
    a = store.register_template("hdi", "import", "ss:en:landslides:*:*:*:*")
    b = store.register_template("hdi", "import", "ss:en:landslides:*:*:*:*")
    assert a == b
    c = store.register_template("hdi", "import", "ss:en:landslides:Twitter:*:*:*")
    assert c != a


def test_paper_example_template_matches_example_key():
    template = KeyTemplate.parse("ss:en:landslides:*:*:*:*")
    assert template.matches(StagingKey.parse(EXAMPLE_RAW))


def test_publish_pending_set_fixed_at_publish_time():
    store = StagingStore()
    reg = store.register_template("hdi", "import", "ss:en:landslides:*:*:*:*")
    store.publish(mk_key(0), b"a")
    rec = store.records()[0]
    assert rec.status == "unprocessed"
    assert rec.pending_importers == frozenset({"hdi"})
    # importer registered after publish does not see the earlier record
    late = store.register_template("late", "import", "ss:en:landslides:*:*:*:*")
    assert store.poll_unprocessed(late, 10) == []
    store.publish(mk_key(1), b"b")
    assert len(store.poll_unprocessed(late, 10)) == 1
    assert len(store.poll_unprocessed(reg, 10)) == 2


def test_publish_without_importers_is_processed():
    store = StagingStore()
    store.publish(mk_key(0), b"a")
    assert store.records()[0].status == "processed"


def test_republish_same_key_rejected():
    store = StagingStore()
    store.publish(mk_key(0), b"a")
    with pytest.raises(DuplicateKeyError):
        store.publish(mk_key(0), b"a")


def test_ids_must_increase_per_streamer_source():
    store = StagingStore()
    store.publish(mk_key(5), b"a")
    with pytest.raises(DuplicateKeyError):
        store.publish(mk_key(4), b"b")
    store.publish(mk_key(4, src="Facebook"), b"c")  # separate sequence


def test_poll_orders_by_id_and_respects_max_n():
    store = StagingStore()
    reg = store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    for i in (3, 7, 9):
        store.publish(mk_key(i), b"x")
    got = store.poll_unprocessed(reg, 2)
    assert [r.key.id for r in got] == [3, 7]


def test_poll_redelivers_until_ack():
    store = StagingStore()
    reg = store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    store.publish(mk_key(0), b"x")
    first = store.poll_unprocessed(reg, 10)
    second = store.poll_unprocessed(reg, 10)
    assert [r.key for r in first] == [r.key for r in second]
    store.ack(reg, first[0].key)
    assert store.poll_unprocessed(reg, 10) == []


def test_unknown_importer_rejected():
    store = StagingStore()
    with pytest.raises(UnknownImporterError):
        store.poll_unprocessed("imp-9999", 1)


def test_ack_transitions_and_double_ack():
    store = StagingStore()
    a = store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    b = store.register_template("ml", "import", "ss:*:*:*:*:*:*")
    store.publish(mk_key(0), b"x")
    assert store.ack(a, mk_key(0)) == "unprocessed"  # one of two importers
    with pytest.raises(AckError):
        store.ack(a, mk_key(0))  # double ack
    assert store.ack(b, mk_key(0)) == "processed"  # last importer


def test_gc_only_removes_processed():
    clock = ManualClock(0)
    store = StagingStore(clock=clock, gc_period=None)
    reg = store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    store.publish(mk_key(0), b"x")
    store.publish(mk_key(1), b"y")
    store.ack(reg, mk_key(0))
    assert store.gc() == 1
    audit = store.audit()
    assert audit == {
        "published": 2,
        "unprocessed": 1,
        "processed_awaiting_gc": 0,
        "deleted": 1,
    }
    assert audit["published"] == audit["unprocessed"] + audit["processed_awaiting_gc"] + audit["deleted"]


def test_periodic_gc_uses_injected_clock():
    clock = ManualClock(0)
    store = StagingStore(clock=clock, gc_period=60)
    store.publish(mk_key(0), b"x")  # processed immediately (no importers)
    assert store.audit()["deleted"] == 0
    clock.advance(61)
    store.publish(mk_key(1), b"y")  # triggers the periodic sweep
    assert store.audit()["deleted"] >= 1


def test_journal_replay_preserves_pending_records(tmp_path):
    journal = tmp_path / "staging.journal"
    store = StagingStore(journal, clock=ManualClock(5))
    reg = store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    store.publish(mk_key(0), b"payload-a")
    store.publish(mk_key(1), b"payload-b")
    store.poll_unprocessed(reg, 10)  # poll without ack, then "crash"
    store.ack(reg, mk_key(0))
    store.close()

    revived = StagingStore(journal, clock=ManualClock(6))
    reg2 = revived.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    assert reg2 == reg
    pending = revived.poll_unprocessed(reg2, 10)
    assert [(r.key.id, r.value) for r in pending] == [(1, b"payload-b")]
    revived.ack(reg2, mk_key(1))
    revived.gc()
    assert revived.audit()["deleted"] == 2
    revived.close()


def test_concurrent_publishers_are_all_stored():
    store = StagingStore()
    store.register_template("hdi", "import", "ss:*:*:*:*:*:*")
    errors = []

    def worker(src, n):
        try:
            for i in range(n):
                store.publish(mk_key(i, src=src), b"x")
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(f"src{k}", 50)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert store.audit()["published"] == 200


_field = st.one_of(st.just("*"), st.sampled_from(["ss", "rs", "en", "num", "a", "b"]))


@given(
    pattern=st.tuples(*[_field] * 7),
    key_fields=st.tuples(*[st.sampled_from(["ss", "rs", "en", "num", "a", "b", "7", "9"])] * 5),
    kid=st.integers(0, 99),
    ts=st.integers(1, 99),
)
@settings(max_examples=200, deadline=None)
def test_template_matching_equals_bruteforce(pattern, key_fields, kid, ts):
    template = KeyTemplate(pattern)
    key = StagingKey(key_fields[0], key_fields[1], key_fields[2], key_fields[3], key_fields[4], kid, ts)
    expected = template_matches(
        pattern,
        (key.streamer, key.lang, key.topic, key.src, key.url, str(key.id), str(key.timestamp)),
    )
    assert template.matches(key) == expected


# ------------------------------------------------------------------- M_Store


def test_mstore_new_entry_stored_with_two_day_ttl():
    clock = ManualClock(1000)
    ms = MetadataStore(clock=clock)
    ms.put(MetadataEntry(LOCATION_STRING, "Rio de Janeiro", 1000 + 2 * DAY), extend_if_below=2 * DAY)
    entry = ms.get("rio de janeiro")
    assert entry is not None and entry.expires_at == 1000 + 2 * DAY


def test_mstore_extend_if_below_adds_threshold():
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock)
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 1 * DAY))
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 2 * DAY), extend_if_below=2 * DAY)
    assert ms.get("Bogota").expires_at == 3 * DAY  # 1 day remaining + 2 days


def test_mstore_extend_if_below_leaves_long_ttl_alone():
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock)
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 5 * DAY))
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 2 * DAY), extend_if_below=2 * DAY)
    assert ms.get("Bogota").expires_at == 5 * DAY


def test_mstore_overwrite_replaces_expiry():
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock)
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 5 * DAY))
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 1 * DAY))
    assert ms.get("Bogota").expires_at == 1 * DAY


def test_mstore_put_requires_future_expiry():
    ms = MetadataStore(clock=ManualClock(100))
    with pytest.raises(ValueError):
        ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 50))


def test_mstore_substring_lookup_and_expiry():
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock)
    assert ms.lookup_substrings("anything") == []
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 100))
    hits = ms.lookup_substrings("mudslide near bogota today")
    assert [e.value for e in hits] == ["Bogota"]
    assert ms.lookup_substrings("no places here") == []
    clock.advance(100)
    assert ms.lookup_substrings("mudslide near bogota today") == []


@given(
    ops=st.lists(
        st.tuples(st.integers(1, 50), st.integers(1, 200)),  # (ttl, advance)
        min_size=1,
        max_size=30,
    )
)
@settings(max_examples=100, deadline=None)
def test_mstore_never_returns_expired(ops):
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock)
    expiries = {}
    for ttl, advance in ops:
        now = clock()
        ms.put(MetadataEntry(LOCATION_STRING, "Oslo", now + ttl))
        expiries["oslo"] = now + ttl
        clock.advance(advance)
        for hit in ms.lookup_substrings("near oslo"):
            assert hit.expires_at > clock()


def test_mstore_journal_replay(tmp_path):
    journal = tmp_path / "mstore.journal"
    clock = ManualClock(0)
    ms = MetadataStore(clock=clock, journal_path=journal)
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 1 * DAY))
    ms.put(MetadataEntry(LOCATION_STRING, "Bogota", 2 * DAY), extend_if_below=2 * DAY)
    ms.close()
    revived = MetadataStore(clock=ManualClock(10), journal_path=journal)
    assert revived.get("Bogota").expires_at == 3 * DAY
    revived.close()
