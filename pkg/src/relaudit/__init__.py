"""Entity-type-restricted relation classification with a leaky vs. corrected evaluation audit."""

from .audit import AuditReport, audit_modes, detect_leak_signature
from .catalog import SubsetCatalog, SubsetKind, build_catalog, catalog_diff, route
from .classifiers import ClassifierSpec, LabelSet, predict, train
from .dataset import NO_RELATION, Dataset, Sample, TypePair, parse_dataset, type_pair_of
from .pipeline import (
    Mode,
    PartialResultStore,
    Prediction,
    Provenance,
    TrainedPipeline,
    precompute_partials,
    predict_corrected,
    predict_leaky,
    run_split,
    train_pipeline,
)
from .scoring import ConfusionCounts, ScoreReport, compute_scores, count_confusion, score_predictions

__version__ = "0.1.0"
