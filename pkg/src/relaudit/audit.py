"""Accounting for the partial-result loophole.

:func:`audit_modes` compares a leaky and a corrected run of the same pipeline
using the provenance recorded on each prediction. :func:`detect_leak_signature`
is a heuristic for prediction files that carry no provenance at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence

from .catalog import CatalogDiff, RouteKind, SubsetCatalog, SubsetKind, build_catalog, partition_by_pair, route
from .dataset import NO_RELATION, Dataset
from .pipeline import STEP3_PROVENANCE, Prediction, Provenance, TrainedPipeline
from .scoring import (
    TRUNCATE,
    ConfusionCounts,
    PredictionLike,
    ScoreReport,
    ScoringError,
    _prediction_map,
    compute_scores,
    count_confusion,
)


class AuditError(ValueError):
    pass


_ROUTE_FOR = {
    Provenance.SIMPLE_STEP: RouteKind.SIMPLE,
    Provenance.DEGENERATE: RouteKind.DEGENERATE,
    Provenance.UNSEEN_PAIR: RouteKind.UNSEEN,
    Provenance.SEMANTIC_STEP: RouteKind.COMPLICATED,
    Provenance.LEAKY_FALLBACK: RouteKind.COMPLICATED,
}

_FALLBACKS = frozenset({Provenance.LEAKY_FALLBACK, Provenance.SUBSTITUTED_FALLBACK})


@dataclass(frozen=True)
class AuditReport:
    rescued_ids: frozenset
    leaky_counts: ConfusionCounts
    corrected_counts: ConfusionCounts
    leaky_scores: ScoreReport
    corrected_scores: ScoreReport
    catalog_diff: Optional[CatalogDiff] = None
    checks: Mapping[str, bool] = field(default_factory=dict)

    @property
    def inflation(self) -> Fraction:
        return self.leaky_scores.f1_exact - self.corrected_scores.f1_exact

    @property
    def fp_delta(self) -> int:
        return self.corrected_counts.fp - self.leaky_counts.fp

    @property
    def consistent(self) -> bool:
        return all(self.checks.values())

    def to_record(self, rounding: str = TRUNCATE) -> dict:
        leaky = self.leaky_scores.display(rounding)
        corrected = self.corrected_scores.display(rounding)
        return {
            "rescued_count": len(self.rescued_ids),
            "rescued_ids": sorted(self.rescued_ids),
            "leaky": self.leaky_scores.to_record(rounding),
            "corrected": self.corrected_scores.to_record(rounding),
            "fp_delta": self.fp_delta,
            "inflation": float(self.inflation),
            # difference of the displayed F1 values, as a reader of the tables would compute it
            "inflation_display": _display_difference(leaky["f1"], corrected["f1"]),
            "checks": dict(self.checks),
            "catalog_diff": self.catalog_diff.to_record() if self.catalog_diff is not None else None,
        }

    def summary(self, rounding: str = TRUNCATE) -> str:
        leaky = self.leaky_scores.display(rounding)["f1"]
        corrected = self.corrected_scores.display(rounding)["f1"]
        lines = [
            f"rescued samples: {len(self.rescued_ids)}",
            f"false positives: leaky={self.leaky_counts.fp} corrected={self.corrected_counts.fp} "
            f"delta={self.fp_delta}",
            f"F1 leaky={leaky} corrected={corrected} "
            f"inflation={_display_difference(leaky, corrected)}",
        ]
        for name, ok in self.checks.items():
            lines.append(f"check {name}: {'ok' if ok else 'VIOLATED'}")
        if self.catalog_diff is not None:
            pairs = ", ".join(str(d.pair) for d in self.catalog_diff.differences) or "none"
            lines.append(
                f"catalog diff ({self.catalog_diff.source_a} vs {self.catalog_diff.source_b}): {pairs}"
            )
        return "\n".join(lines)


def _display_difference(a: str, b: str) -> str:
    hundredths = round(float(a) * 100) - round(float(b) * 100)
    sign = "-" if hundredths < 0 else ""
    hundredths = abs(hundredths)
    return f"{sign}{hundredths // 100}.{hundredths % 100:02d}"


def _by_id(predictions: Sequence[Prediction], data: Dataset, name: str) -> Dict[str, Prediction]:
    out: Dict[str, Prediction] = {}
    for p in predictions:
        if p.sample_id in out:
            raise AuditError(f"{name} predictions list {p.sample_id!r} twice")
        out[p.sample_id] = p
    missing = [sid for sid in data.ids if sid not in out]
    extra = sorted(set(out) - set(data.ids))
    if missing or extra:
        raise AuditError(f"{name} predictions do not cover the dataset: missing={missing[:10]} extra={extra[:10]}")
    return out


def audit_modes(
    data: Dataset,
    pipeline: TrainedPipeline,
    leaky: Sequence[Prediction],
    corrected: Sequence[Prediction],
    catalog_diff: Optional[CatalogDiff] = None,
) -> AuditReport:
    """Reconcile a leaky and a corrected run of ``pipeline`` over ``data``.

    Raises :class:`AuditError` when the provenance tags cannot have come from
    the same pipeline: differing step 1-2 decisions, tags that disagree with
    the catalog's routing, or differing semantic answers on store hits.
    """
    leaky_by_id = _by_id(leaky, data, "leaky")
    corrected_by_id = _by_id(corrected, data, "corrected")

    rescued = set()
    for sample in data:
        lp, cp = leaky_by_id[sample.id], corrected_by_id[sample.id]
        if lp.decided_at is Provenance.SUBSTITUTED_FALLBACK or cp.decided_at in _FALLBACKS:
            raise AuditError(
                f"{sample.id}: unexpected tags leaky={lp.decided_at.value} corrected={cp.decided_at.value}"
            )
        in_step3 = lp.decided_at in STEP3_PROVENANCE
        if in_step3 != (cp.decided_at in STEP3_PROVENANCE) or (
            not in_step3 and (lp.decided_at is not cp.decided_at or lp.predicted != cp.predicted)
        ):
            raise AuditError(
                f"{sample.id}: runs disagree before step 3 "
                f"(leaky {lp.decided_at.value}:{lp.predicted}, corrected {cp.decided_at.value}:{cp.predicted}); "
                f"predictions come from different pipelines"
            )
        if lp.decided_at is Provenance.SEMANTIC_STEP and lp.predicted != cp.predicted:
            raise AuditError(f"{sample.id}: semantic answers differ between runs ({lp.predicted} vs {cp.predicted})")
        if lp.decided_at is not Provenance.BINARY_STEP:
            decision = route(pipeline.catalog, sample)
            if decision.kind is not _ROUTE_FOR[lp.decided_at] or (
                decision.kind is RouteKind.SIMPLE and lp.predicted != decision.relation
            ):
                raise AuditError(
                    f"{sample.id}: tag {lp.decided_at.value} inconsistent with catalog route {decision.kind.value}"
                )
        if lp.decided_at is Provenance.LEAKY_FALLBACK and sample.gold_relation == NO_RELATION:
            rescued.add(sample.id)

    gold = [s.gold_relation for s in data]
    leaky_counts = count_confusion(gold, [leaky_by_id[sid].predicted for sid in data.ids])
    corrected_counts = count_confusion(gold, [corrected_by_id[sid].predicted for sid in data.ids])
    step3_corrected = [p for p in corrected_by_id.values() if p.decided_at is Provenance.SEMANTIC_STEP]
    checks = {
        "tp_unchanged": leaky_counts.tp == corrected_counts.tp,
        "fn_unchanged": leaky_counts.fn == corrected_counts.fn,
        "fp_delta_equals_rescued": corrected_counts.fp - leaky_counts.fp == len(rescued),
        "corrected_step3_never_no_relation": all(p.predicted != NO_RELATION for p in step3_corrected),
    }
    return AuditReport(
        rescued_ids=frozenset(rescued),
        leaky_counts=leaky_counts,
        corrected_counts=corrected_counts,
        leaky_scores=compute_scores(leaky_counts),
        corrected_scores=compute_scores(corrected_counts),
        catalog_diff=catalog_diff,
        checks=checks,
    )


PERFECT_CAVEAT = (
    "predictions on this pair are exact; a perfect predictor is indistinguishable "
    "from the leak by this signature alone"
)
HEURISTIC_NOTE = (
    "heuristic: flags complicated pairs where every gold no_relation sample is "
    "predicted no_relation; it cannot prove leakage"
)


@dataclass(frozen=True)
class PairSignature:
    pair: tuple
    gold_negatives: int
    negatives_kept: int
    positive_errors: int
    flagged: bool
    caveat: Optional[str] = None

    @property
    def coincidence(self) -> float:
        return self.negatives_kept / self.gold_negatives if self.gold_negatives else 0.0

    def to_record(self) -> dict:
        return {
            "pair": list(self.pair),
            "gold_negatives": self.gold_negatives,
            "negatives_kept": self.negatives_kept,
            "coincidence": self.coincidence,
            "positive_errors": self.positive_errors,
            "flagged": self.flagged,
            "caveat": self.caveat,
        }


@dataclass(frozen=True)
class LeakSignatureReport:
    pairs: List[PairSignature]
    min_negatives: int
    note: str = HEURISTIC_NOTE

    @property
    def flagged(self) -> bool:
        return any(p.flagged for p in self.pairs)

    @property
    def flagged_pairs(self) -> List[tuple]:
        return [p.pair for p in self.pairs if p.flagged]

    def to_record(self) -> dict:
        return {
            "flagged": self.flagged,
            "min_negatives": self.min_negatives,
            "note": self.note,
            "pairs": [p.to_record() for p in self.pairs],
        }


def detect_leak_signature(
    data: Dataset,
    predictions: PredictionLike,
    catalog: Optional[SubsetCatalog] = None,
    min_negatives: int = 3,
) -> LeakSignatureReport:
    """Look for complicated pairs whose gold-negative samples are all predicted
    ``no_relation``.

    A step-3 classifier that cannot emit ``no_relation`` only achieves this
    when the binary step never lets a gold negative through, or when gold
    labels leaked into step 3. ``catalog`` decides which pairs are
    complicated; by default it is built from ``data``.
    """
    by_id = _prediction_map(predictions)
    missing = [sid for sid in data.ids if sid not in by_id]
    if missing:
        raise ScoringError(f"predictions missing for {missing[:10]}")
    if catalog is None:
        catalog = build_catalog(data)
    groups = partition_by_pair(data)
    out = []
    for pair in catalog.pairs_of_kind(SubsetKind.COMPLICATED):
        samples = groups.get(pair, [])
        negatives = [s for s in samples if s.gold_relation == NO_RELATION]
        kept = sum(1 for s in negatives if by_id[s.id] == NO_RELATION)
        positive_errors = sum(1 for s in samples if s.is_positive and by_id[s.id] != s.gold_relation)
        flagged = len(negatives) >= min_negatives and kept == len(negatives)
        caveat = PERFECT_CAVEAT if flagged and positive_errors == 0 else None
        out.append(PairSignature(tuple(pair), len(negatives), kept, positive_errors, flagged, caveat))
    return LeakSignatureReport(out, min_negatives)
