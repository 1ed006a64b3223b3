"""Three-step prediction workflow with the leaky and corrected step-3 variants.

Step 1 asks the binary classifier whether a sample carries any relation.
Step 2 resolves Simple subsets to their single relation (Degenerate and
unseen pairs resolve to ``no_relation``). Step 3 handles Complicated subsets:

* leaky mode reads precomputed partial results, built from test data already
  cleared of ``no_relation``, and falls back to ``no_relation`` on a miss;
* corrected mode calls the subset's semantic classifier on every sample;
* substituted mode keeps the partial-result lookup but turns a miss into a
  wrong meaningful label. It scores identically to corrected mode.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
from collections import OrderedDict, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Tuple
from urllib.parse import quote

from .catalog import (
    RouteKind,
    SubsetCatalog,
    build_catalog,
    load_catalog,
    partition_by_pair,
    route,
    save_catalog,
)
from .classifiers import (
    BINARY_NO_RELATION,
    ClassifierError,
    ClassifierSpec,
    LabelSet,
    TrainedClassifier,
    load_classifier,
    save_classifier,
    train,
)
from .dataset import NO_RELATION, Dataset, Sample, TypePair, type_pair_of
from .io import PathLike, read_jsonl, write_json, write_jsonl

LOGGER = logging.getLogger(__name__)


class PipelineError(ValueError):
    pass


class Provenance(str, enum.Enum):
    BINARY_STEP = "binary_step"
    SIMPLE_STEP = "simple_step"
    DEGENERATE = "degenerate"
    UNSEEN_PAIR = "unseen_pair"
    SEMANTIC_STEP = "semantic_step"
    LEAKY_FALLBACK = "leaky_fallback"
    SUBSTITUTED_FALLBACK = "substituted_fallback"


STEP3_PROVENANCE = frozenset(
    {Provenance.SEMANTIC_STEP, Provenance.LEAKY_FALLBACK, Provenance.SUBSTITUTED_FALLBACK}
)


class Mode(str, enum.Enum):
    LEAKY = "leaky"
    CORRECTED = "corrected"
    SUBSTITUTED = "substituted"


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    predicted: str
    decided_at: Provenance

    def __post_init__(self) -> None:
        object.__setattr__(self, "decided_at", Provenance(self.decided_at))
        if self.decided_at is Provenance.LEAKY_FALLBACK and self.predicted != NO_RELATION:
            raise PipelineError(f"{self.sample_id}: leaky fallback must predict {NO_RELATION!r}")

    def to_record(self) -> dict:
        return {"id": self.sample_id, "label": self.predicted, "decided_at": self.decided_at.value}

    @classmethod
    def from_record(cls, record: dict) -> "Prediction":
        return cls(record["id"], record["label"], Provenance(record["decided_at"]))


def _pair_filename(pair: TypePair) -> str:
    return f"{quote(pair.subj_type, safe='')}__{quote(pair.obj_type, safe='')}.jsonl"


class LazySemantics(Mapping):
    """Per-pair semantic classifiers read from disk on first use.

    At most ``keep`` classifiers stay resident; :meth:`evict` drops one early.
    """

    def __init__(self, files: Mapping[TypePair, Path], keep: int = 1):
        self.files = dict(files)
        self.keep = max(1, keep)
        self._cache: "OrderedDict[TypePair, TrainedClassifier]" = OrderedDict()
        self._lock = threading.Lock()

    def __getitem__(self, pair: TypePair) -> TrainedClassifier:
        with self._lock:
            if pair in self._cache:
                self._cache.move_to_end(pair)
                return self._cache[pair]
        classifier = load_classifier(self.files[pair])
        with self._lock:
            self._cache[pair] = classifier
            while len(self._cache) > self.keep:
                self._cache.popitem(last=False)
        return classifier

    def __iter__(self) -> Iterator[TypePair]:
        return iter(self.files)

    def __len__(self) -> int:
        return len(self.files)

    def evict(self, pair: TypePair) -> None:
        with self._lock:
            self._cache.pop(pair, None)

    @property
    def resident(self) -> List[TypePair]:
        return list(self._cache)


@dataclass(frozen=True)
class TrainedPipeline:
    catalog: SubsetCatalog
    binary: TrainedClassifier
    semantics: Mapping[TypePair, TrainedClassifier]

    def __post_init__(self) -> None:
        if self.binary.labels != LabelSet.binary():
            raise PipelineError("binary classifier must use the {MEANINGFUL, NO_RELATION} label set")
        expected = set(self.catalog.complicated_pairs)
        if set(self.semantics) != expected:
            missing = sorted(expected - set(self.semantics))
            extra = sorted(set(self.semantics) - expected)
            raise PipelineError(
                f"semantic classifiers must cover exactly the complicated pairs; "
                f"missing={missing} extra={extra}"
            )
        if not isinstance(self.semantics, LazySemantics):
            for pair, classifier in self.semantics.items():
                self.check_semantic(pair, classifier)

    def check_semantic(self, pair: TypePair, classifier: TrainedClassifier) -> None:
        want = LabelSet.semantic(self.catalog[pair].labels)
        if classifier.labels != want:
            raise PipelineError(
                f"{pair}: semantic label set {classifier.labels.labels} != catalog {want.labels}"
            )

    def semantic(self, pair: TypePair) -> TrainedClassifier:
        classifier = self.semantics[pair]
        if isinstance(self.semantics, LazySemantics):
            self.check_semantic(pair, classifier)
        return classifier

    def release(self, pair: TypePair) -> None:
        if isinstance(self.semantics, LazySemantics):
            self.semantics.evict(pair)


def semantic_training_samples(train_data: Dataset, catalog: SubsetCatalog) -> Dict[TypePair, List[Sample]]:
    """Per complicated pair, training samples cleared of ``no_relation``.

    Samples whose relation is absent from the catalog's label set are dropped
    as well; this only happens when the catalog came from another split.
    """
    groups = partition_by_pair(train_data)
    out = {}
    for pair in catalog.complicated_pairs:
        labels = catalog[pair].labels
        out[pair] = [
            s for s in groups.get(pair, []) if s.gold_relation != NO_RELATION and s.gold_relation in labels
        ]
    return out


def train_pipeline(
    train_data: Dataset,
    binary_spec: ClassifierSpec,
    semantic_spec: ClassifierSpec,
    catalog: Optional[SubsetCatalog] = None,
    max_workers: Optional[int] = None,
) -> TrainedPipeline:
    """Train the binary classifier on all of ``train_data`` and one semantic classifier
    per complicated pair of ``catalog`` (built from ``train_data`` when omitted)."""
    if catalog is None:
        catalog = build_catalog(train_data)
    binary = train(binary_spec, list(train_data), LabelSet.binary())
    per_pair = semantic_training_samples(train_data, catalog)

    def fit(pair: TypePair) -> TrainedClassifier:
        try:
            return train(semantic_spec, per_pair[pair], LabelSet.semantic(catalog[pair].labels))
        except ClassifierError as exc:
            raise PipelineError(f"semantic classifier for {pair}: {exc}") from exc

    pairs = catalog.complicated_pairs
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            fitted = list(pool.map(fit, pairs))
    else:
        fitted = [fit(p) for p in pairs]
    return TrainedPipeline(catalog, binary, dict(zip(pairs, fitted)))


@dataclass(frozen=True)
class PartialResultStore:
    """Step-3 answers precomputed over no_relation-filtered test data, per pair."""

    partials: Mapping[TypePair, Mapping[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frozen = {TypePair(*p): dict(m) for p, m in self.partials.items()}
        for pair, answers in frozen.items():
            for sid, label in answers.items():
                if label == NO_RELATION:
                    raise PipelineError(f"partial result for {sid!r} in {pair} is {NO_RELATION!r}")
        object.__setattr__(self, "partials", frozen)

    def lookup(self, pair: TypePair, sample_id: str) -> Optional[str]:
        return self.partials.get(pair, {}).get(sample_id)

    @property
    def ids(self) -> frozenset:
        return frozenset(sid for answers in self.partials.values() for sid in answers)

    def save(self, directory: PathLike) -> None:
        directory = Path(directory)
        index = []
        for pair, answers in self.partials.items():
            name = _pair_filename(pair)
            write_jsonl(directory / name, ({"id": s, "label": l} for s, l in answers.items()))
            index.append({"pair": list(pair), "file": name})
        write_json(directory / "index.json", index)

    @classmethod
    def load(cls, directory: PathLike) -> "PartialResultStore":
        directory = Path(directory)
        index = json.loads((directory / "index.json").read_text(encoding="utf-8"))
        partials = {}
        for entry in index:
            records = read_jsonl(directory / entry["file"])
            partials[TypePair(*entry["pair"])] = {r["id"]: r["label"] for r in records}
        return cls(partials)


def _map_pairs(fn, pairs, max_workers):
    if max_workers and max_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return list(pool.map(fn, pairs))
    return [fn(p) for p in pairs]


def precompute_partials(
    pipeline: TrainedPipeline, test: Dataset, max_workers: Optional[int] = None
) -> PartialResultStore:
    """Run each semantic classifier once over its subset's test samples whose
    gold relation is meaningful. Gold ``no_relation`` samples never enter the store."""
    groups = partition_by_pair(test)
    pairs = [p for p in pipeline.catalog.complicated_pairs if p in groups]

    def run(pair: TypePair) -> Dict[str, str]:
        classifier = pipeline.semantic(pair)
        # unlabeled samples cannot be filtered and go through like fresh data would
        answers = {s.id: classifier.predict(s) for s in groups[pair] if s.gold_relation != NO_RELATION}
        pipeline.release(pair)
        return answers

    return PartialResultStore(dict(zip(pairs, _map_pairs(run, pairs, max_workers))))


def _first_steps(pipeline: TrainedPipeline, sample: Sample) -> Optional[Prediction]:
    """Steps 1-2; ``None`` means the sample continues to step 3."""
    if pipeline.binary.predict(sample) == BINARY_NO_RELATION:
        return Prediction(sample.id, NO_RELATION, Provenance.BINARY_STEP)
    decision = route(pipeline.catalog, sample)
    if decision.kind is RouteKind.SIMPLE:
        return Prediction(sample.id, decision.relation, Provenance.SIMPLE_STEP)
    if decision.kind is RouteKind.DEGENERATE:
        return Prediction(sample.id, NO_RELATION, Provenance.DEGENERATE)
    if decision.kind is RouteKind.UNSEEN:
        return Prediction(sample.id, NO_RELATION, Provenance.UNSEEN_PAIR)
    return None


def _leaky_step3(store: PartialResultStore, sample: Sample) -> Prediction:
    label = store.lookup(type_pair_of(sample), sample.id)
    if label is not None:
        return Prediction(sample.id, label, Provenance.SEMANTIC_STEP)
    return Prediction(sample.id, NO_RELATION, Provenance.LEAKY_FALLBACK)


def _corrected_step3(classifier: TrainedClassifier, sample: Sample) -> Prediction:
    return Prediction(sample.id, classifier.predict(sample), Provenance.SEMANTIC_STEP)


def _substituted_step3(pipeline: TrainedPipeline, store: PartialResultStore, sample: Sample) -> Prediction:
    found = _leaky_step3(store, sample)
    if found.decided_at is Provenance.SEMANTIC_STEP:
        return found
    labels = sorted(pipeline.catalog[type_pair_of(sample)].labels)
    wrong = next(label for label in labels if label != sample.gold_relation)
    return Prediction(sample.id, wrong, Provenance.SUBSTITUTED_FALLBACK)


def predict_leaky(pipeline: TrainedPipeline, store: PartialResultStore, sample: Sample) -> Prediction:
    early = _first_steps(pipeline, sample)
    return early if early is not None else _leaky_step3(store, sample)


def predict_corrected(pipeline: TrainedPipeline, sample: Sample) -> Prediction:
    early = _first_steps(pipeline, sample)
    if early is not None:
        return early
    return _corrected_step3(pipeline.semantic(type_pair_of(sample)), sample)


def predict_substituted(pipeline: TrainedPipeline, store: PartialResultStore, sample: Sample) -> Prediction:
    early = _first_steps(pipeline, sample)
    return early if early is not None else _substituted_step3(pipeline, store, sample)


def run_split(
    pipeline: TrainedPipeline,
    data: Dataset,
    mode: Mode = Mode.CORRECTED,
    store: Optional[PartialResultStore] = None,
    max_workers: Optional[int] = None,
) -> List[Prediction]:
    """One prediction per sample of ``data``, in order.

    Leaky and substituted modes build their store from ``data`` itself unless
    one is passed, reproducing the original pre-evaluation workflow.
    """
    mode = Mode(mode)
    if mode is not Mode.CORRECTED and store is None:
        store = precompute_partials(pipeline, data, max_workers)

    results: List[Optional[Prediction]] = []
    pending: Dict[TypePair, List[Tuple[int, Sample]]] = defaultdict(list)
    for position, sample in enumerate(data):
        early = _first_steps(pipeline, sample)
        results.append(early)
        if early is None:
            pending[type_pair_of(sample)].append((position, sample))

    def resolve(pair: TypePair) -> List[Tuple[int, Prediction]]:
        items = pending[pair]
        if mode is Mode.LEAKY:
            return [(i, _leaky_step3(store, s)) for i, s in items]
        if mode is Mode.SUBSTITUTED:
            return [(i, _substituted_step3(pipeline, store, s)) for i, s in items]
        classifier = pipeline.semantic(pair)
        out = [(i, _corrected_step3(classifier, s)) for i, s in items]
        pipeline.release(pair)
        return out

    for resolved in _map_pairs(resolve, sorted(pending), max_workers):
        for position, prediction in resolved:
            results[position] = prediction
    return results


def save_predictions(path: PathLike, predictions: List[Prediction]) -> None:
    write_jsonl(path, (p.to_record() for p in predictions))


def load_predictions(path: PathLike) -> List[Prediction]:
    out = []
    for record in read_jsonl(path):
        if "decided_at" not in record:
            raise PipelineError(f"{path}: prediction record for {record.get('id')!r} lacks provenance")
        out.append(Prediction.from_record(record))
    return out


def save_pipeline(directory: PathLike, pipeline: TrainedPipeline) -> None:
    directory = Path(directory)
    save_catalog(directory / "catalog.jsonl", pipeline.catalog)
    save_classifier(directory / "binary.jsonl", pipeline.binary)
    index = []
    for pair in pipeline.catalog.complicated_pairs:
        name = _pair_filename(pair)
        save_classifier(directory / "semantic" / name, pipeline.semantics[pair])
        index.append({"pair": list(pair), "file": name})
    write_json(directory / "manifest.json", {"semantic": index})


def load_pipeline(directory: PathLike, lazy: bool = True) -> TrainedPipeline:
    directory = Path(directory)
    catalog = load_catalog(directory / "catalog.jsonl")
    binary = load_classifier(directory / "binary.jsonl")
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    files = {TypePair(*e["pair"]): directory / "semantic" / e["file"] for e in manifest["semantic"]}
    if lazy:
        semantics: Mapping = LazySemantics(files)
    else:
        semantics = {pair: load_classifier(path) for pair, path in files.items()}
    return TrainedPipeline(catalog, binary, semantics)

