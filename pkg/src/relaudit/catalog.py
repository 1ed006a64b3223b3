"""Type-pair decomposition of a split into Simple / Complicated / Degenerate subsets."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .dataset import NO_RELATION, Dataset, Sample, TypePair, type_pair_of
from .io import PathLike, read_jsonl, write_jsonl


class CatalogError(ValueError):
    pass


class SubsetKind(str, enum.Enum):
    SIMPLE = "simple"
    COMPLICATED = "complicated"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SubsetDescriptor:
    pair: TypePair
    kind: SubsetKind
    labels: frozenset
    train_count: int
    meaningful_train_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "pair", TypePair(*self.pair))
        object.__setattr__(self, "kind", SubsetKind(self.kind))
        object.__setattr__(self, "labels", frozenset(self.labels))
        if NO_RELATION in self.labels:
            raise CatalogError(f"{self.pair}: subset label set may not contain {NO_RELATION!r}")
        expected = _kind_for(len(self.labels))
        if self.kind is not expected:
            raise CatalogError(
                f"{self.pair}: {len(self.labels)} meaningful labels implies {expected.value}, "
                f"got {self.kind.value}"
            )

    @property
    def relation(self) -> str:
        """The single relation of a Simple subset."""
        if self.kind is not SubsetKind.SIMPLE:
            raise CatalogError(f"{self.pair} is {self.kind.value}, not simple")
        (label,) = self.labels
        return label

    def to_record(self) -> dict:
        return {
            "pair": list(self.pair),
            "kind": self.kind.value,
            "labels": sorted(self.labels),
            "train_count": self.train_count,
            "meaningful_train_count": self.meaningful_train_count,
        }

    @classmethod
    def from_record(cls, record: dict) -> "SubsetDescriptor":
        return cls(
            pair=TypePair(*record["pair"]),
            kind=SubsetKind(record["kind"]),
            labels=frozenset(record["labels"]),
            train_count=int(record["train_count"]),
            meaningful_train_count=int(record["meaningful_train_count"]),
        )


def _kind_for(n_meaningful: int) -> SubsetKind:
    if n_meaningful == 0:
        return SubsetKind.DEGENERATE
    if n_meaningful == 1:
        return SubsetKind.SIMPLE
    return SubsetKind.COMPLICATED


@dataclass(frozen=True)
class SubsetCatalog:
    source_split: str
    descriptors: Mapping[TypePair, SubsetDescriptor]

    def __post_init__(self) -> None:
        object.__setattr__(self, "descriptors", dict(sorted(self.descriptors.items())))

    def __getitem__(self, pair: TypePair) -> SubsetDescriptor:
        return self.descriptors[pair]

    def __contains__(self, pair: object) -> bool:
        return pair in self.descriptors

    def __len__(self) -> int:
        return len(self.descriptors)

    def pairs_of_kind(self, kind: SubsetKind) -> List[TypePair]:
        return [p for p, d in self.descriptors.items() if d.kind is kind]

    @property
    def complicated_pairs(self) -> List[TypePair]:
        return self.pairs_of_kind(SubsetKind.COMPLICATED)

    def kind_counts(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in SubsetKind}
        for d in self.descriptors.values():
            counts[d.kind.value] += 1
        return counts


def partition_by_pair(samples: Iterable[Sample]) -> Dict[TypePair, List[Sample]]:
    groups: Dict[TypePair, List[Sample]] = defaultdict(list)
    for sample in samples:
        groups[type_pair_of(sample)].append(sample)
    return dict(groups)


def build_catalog(data: Dataset, source: Optional[str] = None) -> SubsetCatalog:
    """Group ``data`` by type pair and classify each subset by its meaningful labels.

    ``source`` defaults to the dataset's split name and is recorded so audits
    can tell a train-built catalog from a test-built one.
    """
    if len(data) == 0:
        raise CatalogError(f"cannot build a catalog from empty split {data.split_name!r}")
    descriptors = {}
    for pair, samples in partition_by_pair(data).items():
        unlabeled = [s.id for s in samples if not s.labeled]
        if unlabeled:
            raise CatalogError(f"catalog source has unlabeled samples, e.g. {unlabeled[0]!r}")
        meaningful = [s.gold_relation for s in samples if s.gold_relation != NO_RELATION]
        labels = frozenset(meaningful)
        descriptors[pair] = SubsetDescriptor(
            pair=pair,
            kind=_kind_for(len(labels)),
            labels=labels,
            train_count=len(samples),
            meaningful_train_count=len(meaningful),
        )
    return SubsetCatalog(source or data.split_name, descriptors)


class RouteKind(str, enum.Enum):
    SIMPLE = "simple"
    COMPLICATED = "complicated"
    DEGENERATE = "degenerate"
    UNSEEN = "unseen_pair"


@dataclass(frozen=True)
class Route:
    kind: RouteKind
    pair: TypePair
    relation: Optional[str] = None


def route(catalog: SubsetCatalog, sample: Sample) -> Route:
    pair = type_pair_of(sample)
    descriptor = catalog.descriptors.get(pair)
    if descriptor is None:
        return Route(RouteKind.UNSEEN, pair)
    if descriptor.kind is SubsetKind.SIMPLE:
        return Route(RouteKind.SIMPLE, pair, descriptor.relation)
    return Route(RouteKind(descriptor.kind.value), pair)


@dataclass(frozen=True)
class PairDifference:
    pair: TypePair
    kind_a: Optional[SubsetKind]
    kind_b: Optional[SubsetKind]
    labels_a: frozenset
    labels_b: frozenset

    @property
    def kind_changed(self) -> bool:
        return self.kind_a is not self.kind_b

    def to_record(self) -> dict:
        return {
            "pair": list(self.pair),
            "kind_a": self.kind_a.value if self.kind_a else None,
            "kind_b": self.kind_b.value if self.kind_b else None,
            "only_in_a": sorted(self.labels_a - self.labels_b),
            "only_in_b": sorted(self.labels_b - self.labels_a),
        }


@dataclass(frozen=True)
class CatalogDiff:
    source_a: str
    source_b: str
    differences: Tuple[PairDifference, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return bool(self.differences)

    @property
    def pairs(self) -> frozenset:
        return frozenset(d.pair for d in self.differences)

    def to_record(self) -> dict:
        return {
            "source_a": self.source_a,
            "source_b": self.source_b,
            "differences": [d.to_record() for d in self.differences],
        }


def catalog_diff(a: SubsetCatalog, b: SubsetCatalog) -> CatalogDiff:
    """Pairs whose kind or label set differs, including pairs present in only one catalog."""
    out = []
    for pair in sorted(set(a.descriptors) | set(b.descriptors)):
        da, db = a.descriptors.get(pair), b.descriptors.get(pair)
        kind_a, kind_b = (da.kind if da else None), (db.kind if db else None)
        labels_a = da.labels if da else frozenset()
        labels_b = db.labels if db else frozenset()
        if kind_a is not kind_b or labels_a != labels_b:
            out.append(PairDifference(pair, kind_a, kind_b, labels_a, labels_b))
    return CatalogDiff(a.source_split, b.source_split, tuple(out))


def save_catalog(path: PathLike, catalog: SubsetCatalog) -> None:
    write_jsonl(
        path,
        (dict(d.to_record(), source_split=catalog.source_split) for d in catalog.descriptors.values()),
    )


def load_catalog(path: PathLike) -> SubsetCatalog:
    descriptors = {}
    sources = set()
    for record in read_jsonl(path):
        sources.add(record.get("source_split", "train"))
        d = SubsetDescriptor.from_record(record)
        if d.pair in descriptors:
            raise CatalogError(f"{path}: pair {d.pair} listed twice")
        descriptors[d.pair] = d
    if len(sources) != 1:
        raise CatalogError(f"{path}: expected one source split, found {sorted(sources)}")
    return SubsetCatalog(sources.pop(), descriptors)


def format_catalog_table(catalog: SubsetCatalog) -> str:
    rows = [("subject", "object", "kind", "train", "meaningful", "labels")]
    for d in catalog.descriptors.values():
        rows.append(
            (
                d.pair.subj_type,
                d.pair.obj_type,
                d.kind.value,
                str(d.train_count),
                str(d.meaningful_train_count),
                ", ".join(sorted(d.labels)) or "-",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]) - 1)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) + "  " + r[-1] for r in rows]
    counts = catalog.kind_counts()
    lines.append(
        f"source={catalog.source_split} pairs={len(catalog)} "
        + " ".join(f"{k}={v}" for k, v in counts.items())
    )
    return "\n".join(lines)
