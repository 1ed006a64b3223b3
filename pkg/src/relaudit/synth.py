"""Synthetic TACRED-layout corpora with planted confusion patterns.

Three generators:

* :func:`make_fixture_corpus` - a small train/dev/test corpus whose catalog
  divergences, binary misfires and other planted errors are listed in a manifest;
* :func:`make_replay_corpus` - a test split plus oracle ledgers that realize a
  chosen (TP, FP, FN, rescued) outcome through the full pipeline;
* :func:`random_instance` - randomized pipelines and test splits for property checks.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .catalog import build_catalog
from .classifiers import BINARY_NO_RELATION, MEANINGFUL, ClassifierSpec, Kind
from .dataset import NO_RELATION, Dataset, Sample, TypePair
from .pipeline import TrainedPipeline, train_pipeline

FILLER = (
    "the a of in on said was has had after before with from by its their this "
    "that year week report according officials new former last told"
).split()
NAMES = ("Acme", "Globex", "Initech", "Umbrella", "Hooli", "Stark", "Wayne", "Tyrell")
PEOPLE = ("Ada", "Bob", "Chen", "Dara", "Eli", "Fatima", "Goran", "Hana", "Ivo", "Jun")
OBJECT_WORDS = {
    "PERSON": PEOPLE,
    "ORGANIZATION": NAMES,
    "CITY": ("Paris", "Lagos", "Osaka", "Lima", "Oslo"),
    "DATE": ("1990", "March", "2004", "Monday", "1871"),
    "TITLE": ("CEO", "mayor", "professor", "director"),
    "RELIGION": ("Catholic", "Buddhist", "Muslim", "Hindu"),
    "NUMBER": ("three", "42", "seven", "100"),
}


def _sample_id(seed: int, split: str, n: int) -> str:
    return hashlib.sha1(f"{seed}:{split}:{n}".encode()).hexdigest()[:20]


def _cue_words(label: str) -> List[str]:
    if label == NO_RELATION:
        return ["reportedly", "met"]
    return [w for w in label.split(":", 1)[1].replace("/", "_").split("_") if w]


def make_sample(rng: random.Random, sample_id: str, pair: Tuple[str, str], label: str) -> Sample:
    """A short sentence with the subject first, cue words for ``label``, then the object."""
    subj_words = OBJECT_WORDS.get(pair[0], NAMES)
    obj_words = OBJECT_WORDS.get(pair[1], ("thing",))
    tokens = [rng.choice(subj_words)]
    if rng.random() < 0.5:
        tokens.append(rng.choice(subj_words))
    subj_end = len(tokens) - 1
    middle = rng.sample(FILLER, rng.randint(1, 3)) + _cue_words(label)
    rng.shuffle(middle)
    tokens.extend(middle)
    obj_start = len(tokens)
    tokens.append(rng.choice(obj_words))
    tokens.extend(rng.sample(FILLER, rng.randint(0, 2)))
    return Sample(
        id=sample_id,
        tokens=tuple(tokens),
        subj_span=(0, subj_end),
        obj_span=(obj_start, obj_start),
        subj_type=pair[0],
        obj_type=pair[1],
        gold_relation=label,
    )


class _SplitBuilder:
    def __init__(self, rng: random.Random, seed: int, split: str):
        self.rng, self.seed, self.split = rng, seed, split
        self.samples: List[Sample] = []

    def add(self, pair, label, n: int = 1) -> List[Sample]:
        out = []
        for _ in range(n):
            sid = _sample_id(self.seed, self.split, len(self.samples))
            sample = make_sample(self.rng, sid, pair, label)
            self.samples.append(sample)
            out.append(sample)
        return out

    def build(self, shuffle: bool = True) -> Dataset:
        samples = list(self.samples)
        if shuffle:
            self.rng.shuffle(samples)
        return Dataset(self.split, tuple(samples))


# pair, train meaningful counts, train negatives, test meaningful counts, test negatives
FIXTURE_PLAN = (
    (("PERSON", "RELIGION"), {"per:religion": 4}, 3, {"per:religion": 2}, 2),
    (("PERSON", "TITLE"), {"per:title": 6}, 3, {"per:title": 6}, 5),
    (
        ("ORGANIZATION", "PERSON"),
        {"org:founded_by": 3, "org:shareholders": 3, "org:top_members/employees": 3},
        4,
        {"org:founded_by": 1, "org:shareholders": 1, "org:top_members/employees": 1},
        5,
    ),
    (("PERSON", "DATE"), {"per:date_of_birth": 3, "per:date_of_death": 3}, 3,
     {"per:date_of_birth": 1, "per:date_of_death": 1}, 4),
    # test sees only one of the two train relations: complicated -> simple
    (("PERSON", "CITY"), {"per:city_of_birth": 3, "per:cities_of_residence": 3}, 2,
     {"per:cities_of_residence": 2}, 2),
    # test adds a relation never seen in train: simple -> complicated
    (("ORGANIZATION", "CITY"), {"org:city_of_headquarters": 4}, 2,
     {"org:city_of_headquarters": 1, "org:members": 1}, 2),
    (("PERSON", "NUMBER"), {}, 3, {}, 3),
)

FIXTURE_DIVERGENCES = (
    {"pair": ["PERSON", "CITY"], "train_kind": "complicated", "test_kind": "simple"},
    {"pair": ["ORGANIZATION", "CITY"], "train_kind": "simple", "test_kind": "complicated"},
)


@dataclass
class FixtureCorpus:
    train: Dataset
    dev: Dataset
    test: Dataset
    binary_ledger: Dict[str, str]
    semantic_ledger: Dict[str, str]
    manifest: dict


def make_fixture_corpus(seed: int = 0) -> FixtureCorpus:
    rng = random.Random(seed)
    train = _SplitBuilder(rng, seed, "train")
    dev = _SplitBuilder(rng, seed, "dev")
    test = _SplitBuilder(rng, seed, "test")
    test_by_pair: Dict[Tuple[str, str], Dict[str, List[Sample]]] = {}
    for pair, train_pos, train_neg, test_pos, test_neg in FIXTURE_PLAN:
        for label, n in train_pos.items():
            train.add(pair, label, n)
            dev.add(pair, label)
        train.add(pair, NO_RELATION, train_neg)
        dev.add(pair, NO_RELATION)
        groups = {"pos": [], "neg": test.add(pair, NO_RELATION, test_neg)}
        for label, n in test_pos.items():
            groups["pos"].extend(test.add(pair, label, n))
        test_by_pair[pair] = groups

    train_ds, dev_ds, test_ds = train.build(), dev.build(), test.build()
    train_catalog = build_catalog(train_ds)

    org_per, per_date = ("ORGANIZATION", "PERSON"), ("PERSON", "DATE")
    misfires = test_by_pair[org_per]["neg"][:2] + test_by_pair[per_date]["neg"][:1]
    binary_fn = test_by_pair[("PERSON", "TITLE")]["pos"][:1]
    simple_fp = test_by_pair[("PERSON", "RELIGION")]["neg"][:1]
    wrong_semantic = test_by_pair[org_per]["pos"][1:2]

    binary_ledger = {
        s.id: (MEANINGFUL if s.gold_relation != NO_RELATION else BINARY_NO_RELATION) for s in test_ds
    }
    for s in misfires + simple_fp:
        binary_ledger[s.id] = MEANINGFUL
    for s in binary_fn:
        binary_ledger[s.id] = BINARY_NO_RELATION

    semantic_ledger = {}
    for pair in train_catalog.complicated_pairs:
        labels = sorted(train_catalog[pair].labels)
        for s in test_by_pair[tuple(pair)]["pos"] + test_by_pair[tuple(pair)]["neg"]:
            semantic_ledger[s.id] = s.gold_relation if s.gold_relation in labels else labels[0]
    for s in wrong_semantic:
        labels = sorted(train_catalog[TypePair(*org_per)].labels)
        semantic_ledger[s.id] = next(l for l in labels if l != s.gold_relation)

    manifest = {
        "seed": seed,
        "sizes": {"train": len(train_ds), "dev": len(dev_ds), "test": len(test_ds)},
        "planted_divergences": [dict(d) for d in FIXTURE_DIVERGENCES],
        "misfire_ids": sorted(s.id for s in misfires),
        "misfire_pairs": sorted({(s.subj_type, s.obj_type) for s in misfires}),
        "binary_false_negative_ids": sorted(s.id for s in binary_fn),
        "simple_false_positive_ids": sorted(s.id for s in simple_fp),
        "wrong_semantic_ids": sorted(s.id for s in wrong_semantic),
        "catalog_counts": {
            "train": {"simple": 3, "complicated": 3, "degenerate": 1},
            "test": {"simple": 3, "complicated": 3, "degenerate": 1},
        },
    }
    return FixtureCorpus(train_ds, dev_ds, test_ds, binary_ledger, semantic_ledger, manifest)


SIMPLE_PAIRS = {("PERSON", "TITLE"): "per:title", ("PERSON", "RELIGION"): "per:religion"}
COMPLICATED_PAIRS = {
    ("ORGANIZATION", "PERSON"): ("org:founded_by", "org:shareholders", "org:top_members/employees"),
    ("PERSON", "DATE"): ("per:date_of_birth", "per:date_of_death"),
}


@dataclass
class ReplayCorpus:
    train: Dataset
    test: Dataset
    binary_ledger: Dict[str, str]
    semantic_ledger: Dict[str, str]
    manifest: dict


def replay_plan(tp: int, fp: int, fn: int, rescued: int, negatives: int) -> Dict[str, int]:
    """Split target counts into sample categories.

    Keys: ``binary_fn`` (positive, binary says no relation), ``simple_tp``,
    ``semantic_tp``, ``semantic_wrong`` (positive, wrong complicated label),
    ``simple_fp`` (negative passed into a simple pair), ``rescued`` (negative
    passed into a complicated pair), ``true_negative``.
    """
    wrong = min(fp, fn) // 2
    plan = {
        "binary_fn": fn - wrong,
        "simple_tp": tp // 2,
        "semantic_tp": tp - tp // 2,
        "semantic_wrong": wrong,
        "simple_fp": fp - wrong,
        "rescued": rescued,
        "true_negative": negatives - (fp - wrong) - rescued,
    }
    bad = {k: v for k, v in plan.items() if v < 0}
    if bad:
        raise ValueError(f"target counts are not realizable with {negatives} negatives: {bad}")
    return plan


def make_replay_corpus(
    tp: int = 2182,
    fp: int = 246,
    fn: int = 1143,
    rescued: int = 944,
    negatives: int = 2500,
    seed: int = 0,
) -> ReplayCorpus:
    """Test split and oracle ledgers that make the leaky run score (tp, fp, fn)
    and the corrected run score (tp, fp + rescued, fn)."""
    rng = random.Random(seed)
    plan = replay_plan(tp, fp, fn, rescued, negatives)

    train = _SplitBuilder(rng, seed, "train")
    for pair, label in SIMPLE_PAIRS.items():
        train.add(pair, label, 3)
        train.add(pair, NO_RELATION, 2)
    for pair, labels in COMPLICATED_PAIRS.items():
        for label in labels:
            train.add(pair, label, 2)
        train.add(pair, NO_RELATION, 2)

    simple = list(SIMPLE_PAIRS)
    complicated = list(COMPLICATED_PAIRS)
    every = simple + complicated
    test = _SplitBuilder(rng, seed, "test")
    binary: Dict[str, str] = {}
    semantic: Dict[str, str] = {}

    def emit(category: str, pairs: Sequence, verdict: str, gold_of, answer_of=None):
        for i in range(plan[category]):
            pair = pairs[i % len(pairs)]
            (sample,) = test.add(pair, gold_of(pair, i, len(pairs)))
            binary[sample.id] = verdict
            if pair in COMPLICATED_PAIRS:
                semantic[sample.id] = (answer_of or (lambda p, s: s.gold_relation))(pair, sample)

    def first_label(pair, sample):
        return COMPLICATED_PAIRS[pair][0]

    def rotate(pair, i, n_pairs):
        labels = COMPLICATED_PAIRS.get(pair, (SIMPLE_PAIRS.get(pair),))
        return labels[(i // n_pairs) % len(labels)]

    def wrong_label(pair, sample):
        labels = COMPLICATED_PAIRS[pair]
        return labels[(labels.index(sample.gold_relation) + 1) % len(labels)]

    def negative(pair, i, n_pairs):
        return NO_RELATION

    emit("binary_fn", every, BINARY_NO_RELATION, rotate)
    emit("simple_tp", simple, MEANINGFUL, rotate)
    emit("semantic_tp", complicated, MEANINGFUL, rotate)
    emit("semantic_wrong", complicated, MEANINGFUL, rotate, wrong_label)
    emit("simple_fp", simple, MEANINGFUL, negative)
    emit("rescued", complicated, MEANINGFUL, negative, first_label)
    emit("true_negative", every, BINARY_NO_RELATION, negative, first_label)

    test_ds = test.build()
    manifest = {
        "seed": seed,
        "targets": {"tp": tp, "fp": fp, "fn": fn, "rescued": rescued},
        "plan": plan,
        "gold_positives": sum(1 for s in test_ds if s.gold_relation != NO_RELATION),
        "gold_negatives": sum(1 for s in test_ds if s.gold_relation == NO_RELATION),
    }
    return ReplayCorpus(train.build(), test_ds, binary, semantic, manifest)


@dataclass
class RandomInstance:
    seed: int
    train: Dataset
    test: Dataset
    pipeline: TrainedPipeline
    binary_ledger: Optional[Dict[str, str]] = field(default=None)


SUBJECT_TYPES = ("PERSON", "ORGANIZATION")
OBJECT_TYPES = ("CITY", "DATE", "PERSON", "TITLE")


def random_instance(
    seed: int, max_samples: int = 300, max_pairs: int = 8, max_labels: int = 6
) -> RandomInstance:
    """A random pipeline and test split.

    ``max_labels`` counts ``no_relation``. Test data may contain relations
    outside a pair's train label set and pairs never seen in training.
    """
    rng = random.Random(seed)
    all_pairs = [(s, o) for s in SUBJECT_TYPES for o in OBJECT_TYPES][:max_pairs]
    pairs = rng.sample(all_pairs, rng.randint(1, len(all_pairs)))
    meaningful = [f"per:rel{i}" for i in range(max_labels - 1)]
    pair_labels = {p: rng.sample(meaningful, rng.randint(0, min(3, len(meaningful)))) for p in pairs}

    train = _SplitBuilder(rng, seed, "train")
    for pair in pairs:
        for label in pair_labels[pair]:
            train.add(pair, label, rng.randint(1, 4))
        if rng.random() < 0.8 or not pair_labels[pair]:
            train.add(pair, NO_RELATION, rng.randint(1, 4))
    train_ds = train.build()
    catalog = build_catalog(train_ds)

    test = _SplitBuilder(rng, seed, "test")
    unseen = [p for p in all_pairs if p not in pairs]
    for _ in range(rng.randint(0, max_samples)):
        if unseen and rng.random() < 0.05:
            pair = rng.choice(unseen)
        else:
            pair = rng.choice(pairs)
        roll = rng.random()
        if roll < 0.45 or not pair_labels.get(pair):
            label = NO_RELATION if rng.random() < 0.9 or not meaningful else rng.choice(meaningful)
        elif roll < 0.95:
            label = rng.choice(pair_labels[pair])
        else:
            label = rng.choice(meaningful)
        test.add(pair, label)
    test_ds = test.build()

    binary_kind = rng.choice([Kind.SCRIPTED_ORACLE] * 3 + [Kind.FREQUENCY_PRIOR, Kind.NEAREST_NEIGHBOR_BOW])
    binary_ledger = None
    if binary_kind is Kind.SCRIPTED_ORACLE:
        accuracy = rng.uniform(0.4, 1.0)
        binary_ledger = {}
        for s in test_ds:
            right = MEANINGFUL if s.gold_relation != NO_RELATION else BINARY_NO_RELATION
            wrong = BINARY_NO_RELATION if right == MEANINGFUL else MEANINGFUL
            binary_ledger[s.id] = right if rng.random() < accuracy else wrong
        binary_spec = ClassifierSpec(binary_kind, {"ledger": binary_ledger})
    else:
        binary_spec = ClassifierSpec(binary_kind)

    semantic_kind = rng.choice(list(Kind))
    if semantic_kind is Kind.SCRIPTED_ORACLE:
        ledger = {}
        for s in test_ds:
            pair = TypePair(s.subj_type, s.obj_type)
            if pair in catalog and catalog[pair].labels and len(catalog[pair].labels) > 1:
                ledger[s.id] = rng.choice(sorted(catalog[pair].labels))
        semantic_spec = ClassifierSpec(semantic_kind, {"ledger": ledger})
    elif semantic_kind is Kind.FREQUENCY_PRIOR:
        semantic_spec = ClassifierSpec(semantic_kind, {"seed": seed})
    else:
        semantic_spec = ClassifierSpec(semantic_kind)

    pipeline = train_pipeline(train_ds, binary_spec, semantic_spec, catalog)
    return RandomInstance(seed, train_ds, test_ds, pipeline, binary_ledger)
