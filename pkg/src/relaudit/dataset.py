"""TACRED-layout relation extraction data: parsing, validation, serialization."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Tuple, Union

from .io import write_jsonl

LOGGER = logging.getLogger(__name__)

NO_RELATION = "no_relation"
SPLITS = ("train", "dev", "test")
DEFAULT_LABEL_PREFIXES = ("org:", "per:")

REQUIRED_FIELDS = (
    "id",
    "token",
    "subj_start",
    "subj_end",
    "obj_start",
    "obj_end",
    "subj_type",
    "obj_type",
)

PathLike = Union[str, Path]


class DatasetError(ValueError):
    """Raised for malformed or inconsistent relation extraction data."""


class TypePair(NamedTuple):
    subj_type: str
    obj_type: str

    def __str__(self) -> str:
        return f"({self.subj_type}, {self.obj_type})"


class _Unlabeled:
    """Marker for samples loaded without a gold relation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNLABELED"

    def __reduce__(self):
        return (_Unlabeled, ())


UNLABELED = _Unlabeled()

Gold = Union[str, _Unlabeled]


@dataclass(frozen=True)
class Sample:
    id: str
    tokens: Tuple[str, ...]
    subj_span: Tuple[int, int]
    obj_span: Tuple[int, int]
    subj_type: str
    obj_type: str
    gold_relation: Gold = UNLABELED

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "subj_span", tuple(self.subj_span))
        object.__setattr__(self, "obj_span", tuple(self.obj_span))
        n = len(self.tokens)
        for name, (start, end) in (("subj", self.subj_span), ("obj", self.obj_span)):
            if not 0 <= start <= end < n:
                raise DatasetError(
                    f"sample {self.id!r}: {name} span ({start}, {end}) out of bounds "
                    f"for {n} tokens"
                )
        if self.subj_span == self.obj_span:
            raise DatasetError(f"sample {self.id!r}: subject and object spans are identical")

    @property
    def labeled(self) -> bool:
        return self.gold_relation is not UNLABELED

    @property
    def is_positive(self) -> bool:
        """True for a labeled sample whose gold relation is meaningful."""
        return self.labeled and self.gold_relation != NO_RELATION


def type_pair_of(sample: Sample) -> TypePair:
    return TypePair(sample.subj_type, sample.obj_type)


@dataclass(frozen=True)
class Dataset:
    split_name: str
    samples: Tuple[Sample, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        index = {}
        for sample in self.samples:
            if sample.id in index:
                raise DatasetError(f"duplicate sample id {sample.id!r} in split {self.split_name!r}")
            index[sample.id] = sample
        object.__setattr__(self, "_index", index)

    @property
    def label_inventory(self) -> frozenset:
        return frozenset(s.gold_relation for s in self.samples if s.labeled)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, sample_id: str) -> Sample:
        return self._index[sample_id]

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self._index

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(s.id for s in self.samples)


def _field(record: dict, name: str, kind: type, index: int):
    if name not in record:
        raise DatasetError(f"record {index}: missing field {name!r}")
    value = record[name]
    # bool is an int subclass; a span of True/False is malformed
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise DatasetError(
            f"record {index}: field {name!r} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def record_to_sample(
    record: dict,
    index: int = 0,
    label_prefixes: Optional[Sequence[str]] = DEFAULT_LABEL_PREFIXES,
) -> Sample:
    """Convert one interchange record to a :class:`Sample`.

    ``index`` is only used in error messages. Pass ``label_prefixes=None`` to
    accept relation names outside the TACRED ``org:``/``per:`` convention.
    """
    if not isinstance(record, dict):
        raise DatasetError(f"record {index}: expected an object, got {type(record).__name__}")
    sample_id = _field(record, "id", str, index)
    tokens = _field(record, "token", list, index)
    if not all(isinstance(t, str) for t in tokens):
        raise DatasetError(f"record {index}: field 'token' must contain only strings")
    spans = [_field(record, name, int, index) for name in REQUIRED_FIELDS[2:6]]
    subj_type = _field(record, "subj_type", str, index)
    obj_type = _field(record, "obj_type", str, index)

    gold: Gold = UNLABELED
    if record.get("relation") is not None:
        gold = _field(record, "relation", str, index)
        if gold == "":
            raise DatasetError(f"record {index}: field 'relation' is empty")
        if gold != NO_RELATION and label_prefixes and not gold.startswith(tuple(label_prefixes)):
            raise DatasetError(
                f"record {index}: field 'relation' value {gold!r} does not start with "
                f"one of {list(label_prefixes)}"
            )
    return Sample(
        id=sample_id,
        tokens=tuple(tokens),
        subj_span=(spans[0], spans[1]),
        obj_span=(spans[2], spans[3]),
        subj_type=subj_type,
        obj_type=obj_type,
        gold_relation=gold,
    )


def sample_to_record(sample: Sample) -> dict:
    record = {
        "id": sample.id,
        "token": list(sample.tokens),
        "subj_start": sample.subj_span[0],
        "subj_end": sample.subj_span[1],
        "obj_start": sample.obj_span[0],
        "obj_end": sample.obj_span[1],
        "subj_type": sample.subj_type,
        "obj_type": sample.obj_type,
    }
    if sample.labeled:
        record["relation"] = sample.gold_relation
    return record


def iter_records(path: PathLike) -> Iterator[dict]:
    """Yield raw records from a line-delimited file.

    A file whose first non-blank character is ``[`` is read as a single JSON
    array, which is how the official TACRED release ships.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        head = handle.read(1)
        while head and head.isspace():
            head = handle.read(1)
        handle.seek(0)
        if head == "[":
            try:
                records = json.load(handle)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}: invalid JSON array: {exc}") from exc
            yield from records
            return
        index = 0
        for line in handle:
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"record {index}: invalid JSON: {exc.msg}") from exc
            index += 1


def iter_samples(
    path: PathLike, label_prefixes: Optional[Sequence[str]] = DEFAULT_LABEL_PREFIXES
) -> Iterator[Sample]:
    for index, record in enumerate(iter_records(path)):
        try:
            yield record_to_sample(record, index, label_prefixes)
        except DatasetError as exc:
            if str(exc).startswith("record"):
                raise
            raise DatasetError(f"record {index}: {exc}") from exc


def parse_dataset(
    path: PathLike,
    split_name: str,
    label_prefixes: Optional[Sequence[str]] = DEFAULT_LABEL_PREFIXES,
) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    dataset = Dataset(split_name, tuple(iter_samples(path, label_prefixes)))
    LOGGER.info("Loaded %d samples for split %r from %s", len(dataset), split_name, path)
    return dataset


def write_dataset(path: PathLike, data: Union[Dataset, Iterable[Sample]]) -> None:
    write_jsonl(path, (sample_to_record(s) for s in data))
