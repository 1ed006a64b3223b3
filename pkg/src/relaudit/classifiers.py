"""Classifier contract plus baselines for the binary and per-subset semantic roles.

Every classifier is closed-world: ``predict`` returns a member of its
:class:`LabelSet`. A semantic classifier's label set never contains
``no_relation``; the binary classifier's is exactly ``{MEANINGFUL, NO_RELATION}``.
"""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from .dataset import NO_RELATION, Sample
from .io import PathLike, read_jsonl, write_jsonl

MEANINGFUL = "MEANINGFUL"
BINARY_NO_RELATION = "NO_RELATION"


class ClassifierError(ValueError):
    pass


class Role(str, enum.Enum):
    BINARY = "binary"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class LabelSet:
    labels: Tuple[str, ...]
    role: Role = Role.SEMANTIC

    def __post_init__(self) -> None:
        labels = tuple(sorted(set(self.labels)))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "role", Role(self.role))
        if not labels:
            raise ClassifierError("label set must be non-empty")
        if self.role is Role.BINARY and labels != tuple(sorted((MEANINGFUL, BINARY_NO_RELATION))):
            raise ClassifierError(f"binary label set must be {{MEANINGFUL, NO_RELATION}}, got {labels}")
        if self.role is Role.SEMANTIC and NO_RELATION in labels:
            raise ClassifierError(f"semantic label set may not contain {NO_RELATION!r}")

    @classmethod
    def binary(cls) -> "LabelSet":
        return cls((MEANINGFUL, BINARY_NO_RELATION), Role.BINARY)

    @classmethod
    def semantic(cls, labels: Iterable[str]) -> "LabelSet":
        return cls(tuple(labels), Role.SEMANTIC)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def target(self, sample: Sample) -> str:
        """Training target for ``sample`` under this role."""
        if not sample.labeled:
            raise ClassifierError(f"sample {sample.id!r} has no gold label to train on")
        if self.role is Role.BINARY:
            return MEANINGFUL if sample.gold_relation != NO_RELATION else BINARY_NO_RELATION
        if sample.gold_relation == NO_RELATION:
            raise ClassifierError(
                f"semantic training data must be cleared of {NO_RELATION!r}; "
                f"sample {sample.id!r} is not"
            )
        if sample.gold_relation not in self.labels:
            raise ClassifierError(
                f"sample {sample.id!r} label {sample.gold_relation!r} outside label set {self.labels}"
            )
        return sample.gold_relation


class Kind(str, enum.Enum):
    FREQUENCY_PRIOR = "frequency_prior"
    NEAREST_NEIGHBOR_BOW = "nearest_neighbor_bow"
    SCRIPTED_ORACLE = "scripted_oracle"


_ALLOWED_PARAMS = {
    Kind.FREQUENCY_PRIOR: {"seed"},
    Kind.NEAREST_NEIGHBOR_BOW: {"lowercase"},
    Kind.SCRIPTED_ORACLE: {"ledger", "ledger_path"},
}


@dataclass(frozen=True)
class ClassifierSpec:
    kind: Kind
    parameters: Mapping = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError:
            raise ClassifierError(
                f"unknown classifier kind {self.kind!r}; expected one of {[k.value for k in Kind]}"
            ) from None
        params = dict(self.parameters)
        unknown = set(params) - _ALLOWED_PARAMS[self.kind]
        if unknown:
            raise ClassifierError(f"{self.kind.value}: unknown parameters {sorted(unknown)}")
        if self.kind is Kind.SCRIPTED_ORACLE:
            if ("ledger" in params) == ("ledger_path" in params):
                raise ClassifierError("scripted_oracle needs exactly one of 'ledger' or 'ledger_path'")
            if "ledger_path" in params and not Path(params["ledger_path"]).is_file():
                raise ClassifierError(f"scripted_oracle ledger not found: {params['ledger_path']}")
        if "seed" in params and not isinstance(params["seed"], int):
            raise ClassifierError("seed must be an integer")
        object.__setattr__(self, "parameters", params)


class TrainedClassifier:
    """Base class. Subclasses implement ``_predict`` and ``_state``."""

    kind: Kind

    def __init__(self, labels: LabelSet):
        self.labels = labels

    @property
    def role(self) -> Role:
        return self.labels.role

    def predict(self, sample: Sample) -> str:
        label = self._predict(sample)
        if label not in self.labels:
            raise ClassifierError(f"{self.kind.value} produced {label!r} outside {self.labels.labels}")
        return label

    def _predict(self, sample: Sample) -> str:
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "role": self.role.value,
            "labels": list(self.labels.labels),
            "state": self._state(),
        }


class FrequencyPrior(TrainedClassifier):
    kind = Kind.FREQUENCY_PRIOR

    def __init__(self, labels: LabelSet, label: str):
        super().__init__(labels)
        self.label = label

    @classmethod
    def fit(cls, labels: LabelSet, samples: Sequence[Sample], seed: int = 0) -> "FrequencyPrior":
        histogram = Counter(labels.target(s) for s in samples)
        top = max(histogram.values())
        tied = sorted(label for label, n in histogram.items() if n == top)
        return cls(labels, random.Random(seed).choice(tied))

    def _predict(self, sample: Sample) -> str:
        return self.label

    def _state(self) -> dict:
        return {"label": self.label}


def _bag(tokens: Iterable[str], lowercase: bool) -> frozenset:
    return frozenset(t.lower() for t in tokens) if lowercase else frozenset(tokens)


class NearestNeighborBow(TrainedClassifier):
    """1-NN over token sets; score is the size of the token overlap.

    Ties go to the training sample with the lowest id.
    """

    kind = Kind.NEAREST_NEIGHBOR_BOW

    def __init__(self, labels: LabelSet, memory: Sequence[Tuple[str, Sequence[str], str]], lowercase=False):
        super().__init__(labels)
        self.lowercase = lowercase
        self.memory = sorted((sid, tuple(toks), label) for sid, toks, label in memory)
        self._bags = [(_bag(toks, lowercase), label) for _, toks, label in self.memory]

    @classmethod
    def fit(cls, labels: LabelSet, samples: Sequence[Sample], lowercase: bool = False):
        memory = [(s.id, s.tokens, labels.target(s)) for s in samples]
        return cls(labels, memory, lowercase)

    def _predict(self, sample: Sample) -> str:
        query = _bag(sample.tokens, self.lowercase)
        best_score, best_label = -1, None
        # memory is id-sorted, so strict > keeps the lowest id on ties
        for bag, label in self._bags:
            score = len(query & bag)
            if score > best_score:
                best_score, best_label = score, label
        return best_label

    def _state(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "memory": [[sid, list(toks), label] for sid, toks, label in self.memory],
        }


class ScriptedOracle(TrainedClassifier):
    """Table lookup by sample id. Unknown ids are an error, not a default."""

    kind = Kind.SCRIPTED_ORACLE

    def __init__(self, labels: LabelSet, ledger: Mapping[str, str]):
        super().__init__(labels)
        bad = {sid: lab for sid, lab in ledger.items() if lab not in labels}
        if bad:
            sid, lab = next(iter(sorted(bad.items())))
            raise ClassifierError(
                f"oracle ledger maps {sid!r} to {lab!r}, outside label set {labels.labels}"
            )
        self.ledger = dict(ledger)

    def _predict(self, sample: Sample) -> str:
        try:
            return self.ledger[sample.id]
        except KeyError:
            raise ClassifierError(f"scripted oracle has no ledger entry for {sample.id!r}") from None

    def _state(self) -> dict:
        return {"ledger": dict(sorted(self.ledger.items()))}


def train(spec: ClassifierSpec, samples: Sequence[Sample], labels: LabelSet) -> TrainedClassifier:
    """Fit a classifier of ``spec.kind`` on ``samples``.

    For the semantic role, ``samples`` must already be cleared of
    ``no_relation``. A scripted oracle ignores ``samples``; a ledger shared
    across subsets is narrowed to the entries whose label is in ``labels``.
    """
    params = spec.parameters
    if spec.kind is Kind.SCRIPTED_ORACLE:
        ledger = params.get("ledger")
        if ledger is None:
            ledger = load_ledger(params["ledger_path"])
        if labels.role is Role.SEMANTIC:
            ledger = {sid: lab for sid, lab in ledger.items() if lab in labels}
        else:
            ledger = binary_ledger_from_labels(ledger)
        return ScriptedOracle(labels, ledger)
    if not samples:
        raise ClassifierError(f"{spec.kind.value}: empty training set")
    if spec.kind is Kind.FREQUENCY_PRIOR:
        return FrequencyPrior.fit(labels, samples, seed=params.get("seed", 0))
    return NearestNeighborBow.fit(labels, samples, lowercase=params.get("lowercase", False))


def predict(classifier: TrainedClassifier, sample: Sample) -> str:
    return classifier.predict(sample)


def classifier_from_record(record: dict) -> TrainedClassifier:
    labels = LabelSet(tuple(record["labels"]), Role(record["role"]))
    kind = Kind(record["kind"])
    state = record["state"]
    if kind is Kind.FREQUENCY_PRIOR:
        return FrequencyPrior(labels, state["label"])
    if kind is Kind.NEAREST_NEIGHBOR_BOW:
        return NearestNeighborBow(labels, state["memory"], state["lowercase"])
    return ScriptedOracle(labels, state["ledger"])


def save_classifier(path: PathLike, classifier: TrainedClassifier) -> None:
    write_jsonl(path, [classifier.to_record()])


def load_classifier(path: PathLike) -> TrainedClassifier:
    records = list(read_jsonl(path))
    if len(records) != 1:
        raise ClassifierError(f"{path}: expected one classifier record, found {len(records)}")
    return classifier_from_record(records[0])


def load_ledger(path: PathLike) -> Dict[str, str]:
    ledger: Dict[str, str] = {}
    for record in read_jsonl(path):
        sid, label = record["id"], record["label"]
        if sid in ledger and ledger[sid] != label:
            raise ClassifierError(f"{path}: conflicting ledger entries for {sid!r}")
        ledger[sid] = label
    return ledger


def save_ledger(path: PathLike, ledger: Mapping[str, str]) -> None:
    write_jsonl(path, ({"id": sid, "label": label} for sid, label in ledger.items()))


def binary_ledger_from_labels(ledger: Mapping[str, str]) -> Dict[str, str]:
    """Accept binary ledgers written with relation names instead of MEANINGFUL/NO_RELATION."""
    out = {}
    for sid, label in ledger.items():
        if label in (MEANINGFUL, BINARY_NO_RELATION):
            out[sid] = label
        else:
            out[sid] = BINARY_NO_RELATION if label == NO_RELATION else MEANINGFUL
    return out

