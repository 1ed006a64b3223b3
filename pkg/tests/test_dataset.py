import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaudit.dataset import (
    NO_RELATION,
    UNLABELED,
    DatasetError,
    Dataset,
    Sample,
    TypePair,
    parse_dataset,
    sample_to_record,
    type_pair_of,
    write_dataset,
)
from relaudit.synth import make_fixture_corpus

from oracles import scan_jsonl


def _record(**overrides):
    record = {
        "id": "a1",
        "token": ["Bob", "died"],
        "subj_start": 0,
        "subj_end": 0,
        "obj_start": 1,
        "obj_end": 1,
        "subj_type": "PERSON",
        "obj_type": "DATE",
        "relation": "no_relation",
    }
    record.update(overrides)
    return record


def _write(tmp_path, *records, name="data.jsonl"):
    path = tmp_path / name
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def test_minimal_record(tmp_path):
    data = parse_dataset(_write(tmp_path, _record()), "test")
    assert len(data) == 1
    (sample,) = data
    assert sample.tokens == ("Bob", "died")
    assert sample.subj_span == (0, 0) and sample.obj_span == (1, 1)
    assert data.label_inventory == {NO_RELATION}


def test_span_out_of_bounds_names_id(tmp_path):
    path = _write(tmp_path, _record(id="x9", subj_end=2))
    with pytest.raises(DatasetError, match=r"record 0.*'x9'.*out of bounds"):
        parse_dataset(path, "test")


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"subj_start": "0"}, "subj_start"),
        ({"token": "Bob died"}, "token"),
        ({"obj_type": None}, "obj_type"),
        ({"obj_end": True}, "obj_end"),
    ],
)
def test_malformed_field_names_index_and_field(tmp_path, overrides, field):
    path = _write(tmp_path, _record(id="ok"), _record(**overrides))
    with pytest.raises(DatasetError, match=rf"record 1: field '{field}'"):
        parse_dataset(path, "test")


def test_missing_field(tmp_path):
    record = _record()
    del record["subj_type"]
    with pytest.raises(DatasetError, match="record 0: missing field 'subj_type'"):
        parse_dataset(_write(tmp_path, record), "test")


def test_duplicate_id(tmp_path):
    with pytest.raises(DatasetError, match="duplicate sample id 'a1'"):
        parse_dataset(_write(tmp_path, _record(), _record()), "test")


def test_identical_spans_rejected_overlap_allowed(tmp_path):
    with pytest.raises(DatasetError, match="identical"):
        parse_dataset(_write(tmp_path, _record(obj_start=0, obj_end=0)), "test")
    overlapping = _record(token=["a", "b", "c"], subj_end=1, obj_start=1, obj_end=2)
    assert len(parse_dataset(_write(tmp_path, overlapping), "test")) == 1


def test_label_prefix_convention(tmp_path):
    path = _write(tmp_path, _record(relation="loc:contains"))
    with pytest.raises(DatasetError, match="does not start with"):
        parse_dataset(path, "test")
    assert parse_dataset(path, "test", label_prefixes=None).label_inventory == {"loc:contains"}


def test_missing_relation_is_unlabeled_not_empty(tmp_path):
    record = _record()
    del record["relation"]
    (sample,) = parse_dataset(_write(tmp_path, record), "test")
    assert sample.gold_relation is UNLABELED
    assert not sample.labeled and not sample.is_positive
    assert sample_to_record(sample).get("relation") is None


def test_json_array_layout(tmp_path):
    path = tmp_path / "test.json"
    path.write_text(json.dumps([_record(id="a"), _record(id="b")], indent=1))
    assert parse_dataset(path, "test").ids == ("a", "b")


def test_invalid_json_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(_record()) + "\n{oops\n")
    with pytest.raises(DatasetError, match="record 1: invalid JSON"):
        parse_dataset(path, "test")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.jsonl"):
        parse_dataset(tmp_path / "nope.jsonl", "test")


def test_fixture_matches_raw_scan(fixture_dir, fixture_test):
    n_lines, labels = scan_jsonl(fixture_dir / "synth_test.jsonl")
    assert n_lines == 40
    assert len(fixture_test) == n_lines
    assert fixture_test.label_inventory == labels


def test_shipped_fixtures_match_generator(fixture_dir, tmp_path):
    corpus = make_fixture_corpus(0)
    for split in ("train", "dev", "test"):
        write_dataset(tmp_path / f"{split}.jsonl", getattr(corpus, split))
        assert (tmp_path / f"{split}.jsonl").read_text() == (fixture_dir / f"synth_{split}.jsonl").read_text()


def test_type_pair_is_ordered_subject_first():
    org_per = Sample("s", ("X", "Y"), (0, 0), (1, 1), "ORGANIZATION", "PERSON", NO_RELATION)
    assert type_pair_of(org_per) == TypePair("ORGANIZATION", "PERSON")
    per_rel = Sample("t", ("X", "Y"), (0, 0), (1, 1), "PERSON", "RELIGION", "per:religion")
    assert type_pair_of(per_rel) == ("PERSON", "RELIGION")
    assert type_pair_of(per_rel) != ("RELIGION", "PERSON")


def test_type_pair_ignores_tokens():
    a = Sample("a", ("one", "two"), (0, 0), (1, 1), "PERSON", "TITLE", "per:title")
    b = Sample("a", ("x", "y", "z"), (2, 2), (0, 1), "PERSON", "TITLE", NO_RELATION)
    assert type_pair_of(a) == type_pair_of(b)


def test_dataset_rejects_duplicate_ids_directly():
    s = Sample("a", ("x", "y"), (0, 0), (1, 1), "PERSON", "TITLE", NO_RELATION)
    with pytest.raises(DatasetError):
        Dataset("test", (s, s))


tokens = st.lists(st.text(min_size=1, max_size=6), min_size=2, max_size=8)
type_names = st.sampled_from(["PERSON", "ORGANIZATION", "DATE", "CITY", "weird type"])
labels = st.sampled_from([NO_RELATION, "per:title", "org:founded_by", None])


@st.composite
def samples(draw, sid):
    toks = draw(tokens)
    n = len(toks)
    s0 = draw(st.integers(0, n - 1))
    s1 = draw(st.integers(s0, n - 1))
    o0 = draw(st.integers(0, n - 1))
    o1 = draw(st.integers(o0, n - 1))
    if (s0, s1) == (o0, o1):
        o0 = o1 = (s1 + 1) % n if s0 == s1 else s0
    label = draw(labels)
    return Sample(sid, tuple(toks), (s0, s1), (o0, o1), draw(type_names), draw(type_names),
                  UNLABELED if label is None else label)


@st.composite
def datasets(draw):
    n = draw(st.integers(0, 12))
    return Dataset("test", tuple(draw(samples(f"id{i}")) for i in range(n)))


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_round_trip(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("rt") / "data.jsonl"
    write_dataset(path, data)
    again = parse_dataset(path, "test")
    assert again.samples == data.samples
    write_dataset(path, again)
    assert parse_dataset(path, "test").samples == data.samples
