import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaudit.catalog import (
    CatalogError,
    RouteKind,
    SubsetCatalog,
    SubsetDescriptor,
    SubsetKind,
    build_catalog,
    catalog_diff,
    load_catalog,
    partition_by_pair,
    route,
    save_catalog,
)
from relaudit.dataset import NO_RELATION, Dataset, Sample, TypePair

from oracles import kind_of, pair_labels


def mk(sid, subj, obj, label):
    return Sample(sid, ("a", "b"), (0, 0), (1, 1), subj, obj, label)


def ds(*rows, split="train"):
    return Dataset(split, tuple(mk(f"s{i}", *row) for i, row in enumerate(rows)))


def test_person_religion_is_simple():
    cat = build_catalog(ds(("PERSON", "RELIGION", NO_RELATION), ("PERSON", "RELIGION", "per:religion")))
    d = cat[TypePair("PERSON", "RELIGION")]
    assert d.kind is SubsetKind.SIMPLE and d.relation == "per:religion"
    assert (d.train_count, d.meaningful_train_count) == (2, 1)


def test_person_title_is_simple():
    cat = build_catalog(ds(("PERSON", "TITLE", "per:title"), ("PERSON", "TITLE", "per:title")))
    assert cat[("PERSON", "TITLE")].relation == "per:title"


def test_org_person_is_complicated_without_no_relation():
    rows = [("ORGANIZATION", "PERSON", label) for label in
            (NO_RELATION, "org:founded_by", "org:shareholders", "org:employees")]
    d = build_catalog(ds(*rows))[("ORGANIZATION", "PERSON")]
    assert d.kind is SubsetKind.COMPLICATED
    assert d.labels == {"org:founded_by", "org:shareholders", "org:employees"}


def test_only_no_relation_is_degenerate():
    d = build_catalog(ds(("PERSON", "NUMBER", NO_RELATION)))[("PERSON", "NUMBER")]
    assert d.kind is SubsetKind.DEGENERATE and d.labels == frozenset()


def test_empty_dataset_rejected():
    with pytest.raises(CatalogError):
        build_catalog(Dataset("train", ()))


def test_descriptor_rejects_inconsistent_kind():
    with pytest.raises(CatalogError):
        SubsetDescriptor(TypePair("A", "B"), SubsetKind.SIMPLE, {"x:a", "x:b"}, 2, 2)
    with pytest.raises(CatalogError):
        SubsetDescriptor(TypePair("A", "B"), SubsetKind.COMPLICATED, {"x:a", NO_RELATION}, 2, 2)


def test_route_kinds():
    cat = build_catalog(ds(
        ("PERSON", "RELIGION", "per:religion"),
        ("ORGANIZATION", "PERSON", "org:founded_by"),
        ("ORGANIZATION", "PERSON", "org:shareholders"),
        ("PERSON", "NUMBER", NO_RELATION),
    ))
    assert route(cat, mk("q", "PERSON", "RELIGION", NO_RELATION)).relation == "per:religion"
    assert route(cat, mk("q", "ORGANIZATION", "PERSON", NO_RELATION)).kind is RouteKind.COMPLICATED
    assert route(cat, mk("q", "ORGANIZATION", "PERSON", NO_RELATION)).pair == ("ORGANIZATION", "PERSON")
    assert route(cat, mk("q", "PERSON", "NUMBER", NO_RELATION)).kind is RouteKind.DEGENERATE
    assert route(cat, mk("q", "PERSON", "CRIMINAL_CHARGE", NO_RELATION)).kind is RouteKind.UNSEEN


def test_fixture_org_person_routes_complicated(fixture_train):
    brute = pair_labels(fixture_train)
    assert len(brute[("ORGANIZATION", "PERSON")]) >= 2
    cat = build_catalog(fixture_train)
    probe = mk("q", "ORGANIZATION", "PERSON", NO_RELATION)
    assert route(cat, probe).kind is RouteKind.COMPLICATED


def test_diff_identity(fixture_train):
    cat = build_catalog(fixture_train)
    assert not catalog_diff(cat, cat)
    assert catalog_diff(cat, cat).differences == ()


def test_diff_flags_kind_change():
    a = build_catalog(ds(("PERSON", "CITY", "per:x")))
    b = build_catalog(ds(("PERSON", "CITY", "per:x"), ("PERSON", "CITY", "per:y")), "test")
    (d,) = catalog_diff(a, b).differences
    assert d.kind_changed and d.kind_a is SubsetKind.SIMPLE and d.kind_b is SubsetKind.COMPLICATED
    assert d.to_record()["only_in_b"] == ["per:y"]


def test_diff_reports_pairs_missing_on_one_side():
    a = build_catalog(ds(("PERSON", "CITY", "per:x")))
    b = build_catalog(ds(("PERSON", "CITY", "per:x"), ("PERSON", "DATE", NO_RELATION)))
    (d,) = catalog_diff(a, b).differences
    assert d.pair == ("PERSON", "DATE") and d.kind_a is None


def test_fixture_train_vs_test_diff_matches_manifest(fixture_train, fixture_test, corpus):
    diff = catalog_diff(build_catalog(fixture_train), build_catalog(fixture_test))
    got = [{"pair": list(d.pair), "train_kind": d.kind_a.value, "test_kind": d.kind_b.value}
           for d in diff.differences]
    planted = sorted(corpus.manifest["planted_divergences"], key=lambda d: d["pair"])
    assert got == planted


def test_fixture_kind_counts(fixture_train, fixture_test, corpus):
    assert build_catalog(fixture_train).kind_counts() == corpus.manifest["catalog_counts"]["train"]
    assert build_catalog(fixture_test).kind_counts() == corpus.manifest["catalog_counts"]["test"]


def test_catalog_file_round_trip(tmp_path, fixture_train):
    cat = build_catalog(fixture_train)
    save_catalog(tmp_path / "c.jsonl", cat)
    again = load_catalog(tmp_path / "c.jsonl")
    assert again == cat and again.source_split == "train"


def test_catalog_is_immutable_snapshot():
    cat = build_catalog(ds(("PERSON", "CITY", "per:x")))
    with pytest.raises(Exception):
        cat.source_split = "test"


TYPES = ["PERSON", "ORGANIZATION", "CITY", "DATE"]
LABELS = [NO_RELATION, "per:a", "per:b", "per:c"]


@st.composite
def random_data(draw):
    rows = draw(st.lists(st.tuples(st.sampled_from(TYPES[:2]), st.sampled_from(TYPES),
                                   st.sampled_from(LABELS)), min_size=1, max_size=40))
    return ds(*rows)


@settings(max_examples=200, deadline=None)
@given(random_data())
def test_kind_soundness_against_brute_force(data):
    cat = build_catalog(data)
    brute = pair_labels(data)
    assert set(cat.descriptors) == set(brute)
    for pair, labels in brute.items():
        assert cat[pair].labels == labels
        assert cat[pair].kind.value == kind_of(labels)


@settings(max_examples=200, deadline=None)
@given(random_data())
def test_partition_property(data):
    groups = partition_by_pair(data)
    flat = sorted(s.id for members in groups.values() for s in members)
    assert flat == sorted(data.ids)
    for pair, members in groups.items():
        assert all((s.subj_type, s.obj_type) == pair for s in members)


@settings(max_examples=200, deadline=None)
@given(random_data(), st.randoms(use_true_random=False))
def test_simple_to_complicated_under_injection(data, rnd):
    cat = build_catalog(data)
    simple = cat.pairs_of_kind(SubsetKind.SIMPLE)
    if not simple:
        return
    pair = rnd.choice(simple)
    new_label = "per:injected"
    injected = Dataset("train", data.samples + (mk("inj", pair.subj_type, pair.obj_type, new_label),))
    after = build_catalog(injected)[pair]
    assert after.kind is SubsetKind.COMPLICATED
    assert after.labels == cat[pair].labels | {new_label}


def test_randomized_catalogs_many_seeds():
    rng = random.Random(7)
    for _ in range(300):
        rows = [(rng.choice(TYPES[:2]), rng.choice(TYPES), rng.choice(LABELS))
                for _ in range(rng.randint(1, 60))]
        data = ds(*rows)
        cat = build_catalog(data)
        for pair, labels in pair_labels(data).items():
            assert cat[pair].kind.value == kind_of(labels)
        assert isinstance(cat, SubsetCatalog)
