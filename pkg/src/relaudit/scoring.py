"""Micro precision / recall / F1 with ``no_relation`` as the negative class."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Mapping, Sequence, Tuple, Union

from .dataset import NO_RELATION, UNLABELED, Dataset

TRUNCATE = "truncate"
HALF_UP = "half-up"
ROUNDING_MODES = (TRUNCATE, HALF_UP)


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ScoringError(f"{name} must be a non-negative integer, got {value!r}")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn}


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def to_percent(value: Fraction, rounding: str = TRUNCATE) -> str:
    """Format a ratio as a x100 value with two decimals.

    ``truncate`` drops digits past the second decimal, which is how the
    reference 89.86 / 75.85 / 64.70 figures were produced from their counts;
    ``half-up`` rounds ties away from zero.
    """
    if rounding not in ROUNDING_MODES:
        raise ScoringError(f"unknown rounding {rounding!r}; expected one of {ROUNDING_MODES}")
    scaled = Fraction(value) * 10000
    if rounding == HALF_UP:
        scaled += Fraction(1, 2)
    hundredths = math.floor(scaled)
    return f"{hundredths // 100}.{hundredths % 100:02d}"


@dataclass(frozen=True)
class ScoreReport:
    counts: ConfusionCounts
    precision_exact: Fraction
    recall_exact: Fraction
    f1_exact: Fraction

    @property
    def precision(self) -> float:
        return float(self.precision_exact)

    @property
    def recall(self) -> float:
        return float(self.recall_exact)

    @property
    def f1(self) -> float:
        return float(self.f1_exact)

    def display(self, rounding: str = TRUNCATE) -> dict:
        return {
            "precision": to_percent(self.precision_exact, rounding),
            "recall": to_percent(self.recall_exact, rounding),
            "f1": to_percent(self.f1_exact, rounding),
        }

    def to_record(self, rounding: str = TRUNCATE) -> dict:
        return {
            **self.counts.as_dict(),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "display": self.display(rounding),
            "rounding": rounding,
        }


def count_confusion(gold: Sequence[str], predicted: Sequence[str]) -> ConfusionCounts:
    """Pooled counts over aligned label lists.

    A meaningful prediction that disagrees with a meaningful gold label counts
    as both a false positive and a false negative.
    """
    if len(gold) != len(predicted):
        raise ScoringError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
    tp = fp = fn = 0
    for g, p in zip(gold, predicted):
        if g is UNLABELED or g is None:
            raise ScoringError("cannot score against a missing gold label")
        if g != NO_RELATION and p == g:
            tp += 1
            continue
        if p != NO_RELATION:
            fp += 1
        if g != NO_RELATION:
            fn += 1
    return ConfusionCounts(tp, fp, fn)


def compute_scores(counts: ConfusionCounts) -> ScoreReport:
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    if precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ScoreReport(counts, precision, recall, f1)


PredictionLike = Union[Mapping[str, str], Iterable]


def _prediction_map(predictions: PredictionLike) -> Mapping[str, str]:
    if isinstance(predictions, Mapping):
        return predictions
    out = {}
    for p in predictions:
        sid, label = (p.sample_id, p.predicted) if hasattr(p, "sample_id") else p
        if sid in out:
            raise ScoringError(f"duplicate prediction for id {sid!r}")
        out[sid] = label
    return out


def align(data: Dataset, predictions: PredictionLike) -> Tuple[List[str], List[str]]:
    by_id = _prediction_map(predictions)
    missing = [sid for sid in data.ids if sid not in by_id]
    extra = sorted(set(by_id) - set(data.ids))
    if missing or extra:
        raise ScoringError(
            f"predictions do not cover the dataset: missing={missing[:20]} extra={extra[:20]}"
            + (" (truncated)" if len(missing) > 20 or len(extra) > 20 else "")
        )
    gold = [s.gold_relation for s in data]
    return gold, [by_id[sid] for sid in data.ids]


def score_predictions(data: Dataset, predictions: PredictionLike) -> ScoreReport:
    return compute_scores(count_confusion(*align(data, predictions)))


def format_score_table(rows: Sequence[Tuple[str, ScoreReport]], rounding: str = TRUNCATE) -> str:
    """Two aligned tables: raw counts, then precision / recall / F1 (x100)."""
    name_w = max([len("experiment")] + [len(name) for name, _ in rows])
    lines = [f"{'experiment':<{name_w}}  {'TP':>7}  {'FP':>7}  {'FN':>7}"]
    for name, report in rows:
        c = report.counts
        lines.append(f"{name:<{name_w}}  {c.tp:>7}  {c.fp:>7}  {c.fn:>7}")
    lines.append("")
    lines.append(f"{'experiment':<{name_w}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}")
    for name, report in rows:
        d = report.display(rounding)
        lines.append(f"{name:<{name_w}}  {d['precision']:>9}  {d['recall']:>9}  {d['f1']:>9}")
    return "\n".join(lines)
