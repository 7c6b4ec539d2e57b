"""Evaluation metrics, prediction-file handling, and ensembling.

The contest metric is log loss; precision/recall/F1 at a threshold round
out the report. Ensembling is a per-pair weighted mean over prediction
files produced by any model (including external ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import AlignmentError, ParseError, ValidationError

PROB_CLIP = 1e-15


@dataclass(frozen=True)
class PredictionRecord:
    """A pair id and the probability that its questions match."""

    pair_id: str
    probability: float

    def __post_init__(self):
        if not math.isfinite(self.probability) or not 0.0 <= self.probability <= 1.0:
            raise ValidationError(
                f"prediction {self.pair_id}: probability must be a finite value in [0, 1], "
                f"got {self.probability!r}"
            )


@dataclass(frozen=True)
class MetricsReport:
    """Log loss plus positive-class precision/recall/F1 at a threshold.

    Ratio fields are None when their denominator is zero (no predicted
    positives, no actual positives, ...), never silently 0.
    """

    n: int
    log_loss: float
    precision: float | None
    recall: float | None
    f1: float | None
    threshold: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "log_loss": self.log_loss,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "threshold": self.threshold,
        }

    def format_row(self) -> str:
        """Compact scoreboard row: log loss to 4 places, ratios to 2."""

        def ratio(x):
            return "-" if x is None else f"{x:.2f}"

        return f"{self.log_loss:.4f}\t{ratio(self.precision)}\t{ratio(self.recall)}\t{ratio(self.f1)}"


def _check_lengths(labels: Sequence[int], probs: Sequence[float]) -> None:
    if len(labels) == 0 or len(probs) == 0:
        raise ValidationError("labels and probabilities must be non-empty")
    if len(labels) != len(probs):
        raise ValidationError(
            f"length mismatch: {len(labels)} labels vs {len(probs)} probabilities"
        )
    bad = [y for y in labels if y not in (0, 1)]
    if bad:
        raise ValidationError(f"labels must be 0 or 1, got {bad[:5]}")


def log_loss(labels: Sequence[int], probs: Sequence[float]) -> float:
    """Mean negative log-likelihood of the labels under the predictions.

    Probabilities are clipped to [1e-15, 1 - 1e-15] before the logarithm
    so perfect or degenerate predictions stay finite.
    """
    _check_lengths(labels, probs)
    total = 0.0
    for y, p in zip(labels, probs):
        p = min(max(p, PROB_CLIP), 1.0 - PROB_CLIP)
        total += y * math.log(p) + (1 - y) * math.log(1.0 - p)
    return -total / len(labels)


def classification_metrics(
    labels: Sequence[int], probs: Sequence[float], threshold: float = 0.5
) -> MetricsReport:
    """Positive-class precision/recall/F1 at ``prob >= threshold``, plus
    log loss."""
    _check_lengths(labels, probs)
    tp = fp = fn = 0
    for y, p in zip(labels, probs):
        predicted = p >= threshold
        if predicted and y == 1:
            tp += 1
        elif predicted and y == 0:
            fp += 1
        elif not predicted and y == 1:
            fn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = None
    return MetricsReport(
        n=len(labels),
        log_loss=log_loss(labels, probs),
        precision=precision,
        recall=recall,
        f1=f1,
        threshold=threshold,
    )


def write_predictions(records: Sequence[PredictionRecord], path) -> None:
    """Write a predictions TSV: pair id, probability with 6 decimals."""
    lines = [f"{r.pair_id}\t{r.probability:.6f}\n" for r in records]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_predictions(path) -> list[PredictionRecord]:
    """Read a predictions TSV written by :func:`write_predictions`."""
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 tab-separated columns, got {len(cols)}")
        try:
            prob = float(cols[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad probability {cols[1]!r}") from None
        try:
            records.append(PredictionRecord(pair_id=cols[0], probability=prob))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return records


def ensemble_average(
    prediction_files: Sequence, weights: Sequence[float] | None = None
) -> list[PredictionRecord]:
    """Per-pair weighted mean probability over prediction files.

    All files must cover exactly the same pair ids; output follows the
    first file's order. Uniform weights by default; given weights must be
    nonnegative and not all zero, and are renormalized by their sum.
    """
    if len(prediction_files) == 0:
        raise ValidationError("ensemble needs at least one prediction file")
    if weights is None:
        weights = [1.0] * len(prediction_files)
    if len(weights) != len(prediction_files):
        raise ValidationError(
            f"{len(weights)} weights for {len(prediction_files)} prediction files"
        )
    if any(w < 0 for w in weights):
        raise ValidationError("ensemble weights must be nonnegative")
    weight_sum = sum(weights)
    if weight_sum <= 0:
        raise ValidationError("ensemble weights must not all be zero")

    per_file = []
    for file in prediction_files:
        records = read_predictions(file)
        table = {r.pair_id: r.probability for r in records}
        if len(table) != len(records):
            raise ValidationError(f"{file}: duplicate pair ids")
        per_file.append((file, records, table))

    _, first_records, first_table = per_file[0]
    reference_ids = set(first_table)
    for file, _, table in per_file[1:]:
        if set(table) != reference_ids:
            missing = sorted(reference_ids - set(table))
            extra = sorted(set(table) - reference_ids)
            raise AlignmentError(
                f"{file}: pair ids do not match the first file "
                f"(missing {missing[:5]}, unexpected {extra[:5]})"
            )

    out = []
    for record in first_records:
        blended = sum(w * table[record.pair_id] for w, (_, _, table) in zip(weights, per_file))
        out.append(PredictionRecord(pair_id=record.pair_id, probability=blended / weight_sum))
    return out
