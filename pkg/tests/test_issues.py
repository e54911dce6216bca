import hashlib

from hypothesis import given, settings, strategies as st

from texhtml.issues import IssueStore, dedup_key, normalize_snippet


def store_at(tmp_path):
    return IssueStore(tmp_path / "reports.ndjson")


def test_normalize_snippet():
    assert normalize_snippet("  The  Proof\n\tfollows ") == "the proof follows"
    assert normalize_snippet(None) == ""
    assert normalize_snippet("") == ""


def test_dedup_key_matches_hash_construction():
    key = dedup_key("p/1", "A  b")
    expected = hashlib.sha256("p/1\x00a b".encode("utf-8")).hexdigest()
    assert key == expected


def test_first_report_is_primary(tmp_path):
    store = store_at(tmp_path)
    rep = store.submit_report("p/1", "snippet", "broken math")
    assert rep.duplicate_of is None
    assert rep.report_id
    assert rep.created_at


def test_same_normalized_snippet_is_duplicate(tmp_path):
    store = store_at(tmp_path)
    first = store.submit_report("p/1", "The  Proof", "a")
    dup = store.submit_report("p/1", " the proof ", "b")
    assert dup.duplicate_of == first.report_id


def test_duplicates_point_at_earliest_primary(tmp_path):
    store = store_at(tmp_path)
    first = store.submit_report("p/1", "x", "a")
    second = store.submit_report("p/1", "x", "b")
    third = store.submit_report("p/1", "X ", "c")
    assert second.duplicate_of == first.report_id
    assert third.duplicate_of == first.report_id


def test_different_papers_never_collide(tmp_path):
    store = store_at(tmp_path)
    a = store.submit_report("p/1", "same text", "a")
    b = store.submit_report("p/2", "same text", "b")
    assert a.duplicate_of is None and b.duplicate_of is None


def test_absent_snippet_treated_as_empty(tmp_path):
    store = store_at(tmp_path)
    a = store.submit_report("p/1", None, "a")
    b = store.submit_report("p/1", "", "b")
    assert b.duplicate_of == a.report_id


def test_list_reports_excludes_duplicates_newest_first(tmp_path):
    store = store_at(tmp_path)
    a = store.submit_report("p/1", "one", "a")
    store.submit_report("p/1", "one", "dup")
    b = store.submit_report("p/1", "two", "b")
    store.submit_report("p/other", "three", "c")
    listed = store.list_reports("p/1")
    assert [r.report_id for r in listed] == [b.report_id, a.report_id]


def test_persistence_round_trip_bit_exact(tmp_path):
    path = tmp_path / "reports.ndjson"
    store = IssueStore(path)
    store.submit_report("p/1", "snippet one", "desc")
    store.submit_report("p/1", "snippet one", "dup desc")
    store.submit_report("p/2", None, "no snippet")
    before = path.read_bytes()

    reopened = IssueStore(path)
    assert path.read_bytes() == before
    assert [r.to_wire() for r in reopened.list_reports("p/1")] == \
        [r.to_wire() for r in store.list_reports("p/1")]
    rep = reopened.submit_report("p/1", "Snippet  ONE", "late dup")
    assert rep.duplicate_of == store.list_reports("p/1")[-1].report_id


def test_wire_format_field_names(tmp_path):
    store = store_at(tmp_path)
    rep = store.submit_report("p/1", "s", "d")
    assert set(rep.to_wire()) == {"reportId", "paperId", "snippet",
                                  "description", "createdAt", "dedupKey"}
    dup = store.submit_report("p/1", "s", "d2")
    assert dup.to_wire()["duplicateOf"] == rep.report_id


@given(st.text(max_size=80), st.text(max_size=80))
@settings(max_examples=200)
def test_dedup_key_agrees_with_normalization(paper_id, snippet):
    same = dedup_key(paper_id, snippet) == dedup_key(paper_id, normalize_snippet(snippet))
    assert same
