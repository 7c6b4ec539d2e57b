"""Character n-gram matching baseline.

Similarity is the cosine between character n-gram count profiles of the
lowercased sentences (trigrams by default, with boundary markers). A
single-feature logistic fit converts similarities into the probabilities
the log-loss metric needs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .corpus import MintedPair
from .errors import CalibrationError, ValidationError
from .evalkit import PredictionRecord

# Control characters never occur in question text, so they are safe
# boundary markers.
BOUNDARY_MARKER = "\x02"


@dataclass(frozen=True)
class NgramProfile:
    """Counts of the character n-grams of one sentence."""

    n: int
    counts: Mapping[str, int]

    @classmethod
    def from_text(cls, text: str, n: int, pad: bool = True) -> "NgramProfile":
        if n < 1:
            raise ValidationError(f"n-gram order must be >= 1, got {n}")
        s = text.casefold()
        if pad:
            s = BOUNDARY_MARKER * (n - 1) + s + BOUNDARY_MARKER * (n - 1)
        grams = Counter(s[i : i + n] for i in range(len(s) - n + 1))
        return cls(n=n, counts=dict(grams))


def profile_cosine(a: NgramProfile, b: NgramProfile) -> float:
    """Cosine similarity between two count profiles.

    Two empty profiles are identical (1.0); one empty profile has nothing
    in common with anything (0.0).
    """
    if not a.counts and not b.counts:
        return 1.0
    if not a.counts or not b.counts:
        return 0.0
    dot = sum(count * b.counts.get(gram, 0) for gram, count in a.counts.items())
    norm_a = math.sqrt(sum(c * c for c in a.counts.values()))
    norm_b = math.sqrt(sum(c * c for c in b.counts.values()))
    return dot / (norm_a * norm_b)


def char_ngram_similarity(a: str, b: str, n: int = 3, pad: bool = True) -> float:
    """Cosine similarity of the two sentences' character n-gram profiles."""
    return profile_cosine(NgramProfile.from_text(a, n, pad), NgramProfile.from_text(b, n, pad))


@dataclass(frozen=True)
class LogisticCalibration:
    """Parameters mapping similarity to probability via
    sigmoid(slope * similarity + intercept)."""

    slope: float
    intercept: float

    def probability(self, similarity: float) -> float:
        z = self.slope * similarity + self.intercept
        # guard against overflow for extreme fitted slopes
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        ez = math.exp(z)
        return ez / (1.0 + ez)


def calibrate_baseline(
    pairs: Sequence[MintedPair], n: int = 3, pad: bool = True
) -> LogisticCalibration:
    """Fit the similarity-to-probability mapping by maximum likelihood.

    Needs both labels present; perfectly separable data fits an
    arbitrarily steep slope, which is fine for prediction.
    """
    sims, labels = [], []
    for pair in pairs:
        if pair.label is None:
            raise ValidationError("calibration needs labeled pairs")
        sims.append(char_ngram_similarity(pair.spanish_1, pair.spanish_2, n, pad))
        labels.append(pair.label)
    if len(set(labels)) < 2:
        raise CalibrationError("calibration needs both labels present in the pairs")

    x = np.asarray(sims, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)

    def nll_and_grad(params):
        slope, intercept = params
        z = slope * x + intercept
        # log(1 + e^z) - y*z, stable for large |z|
        nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
        p = 1.0 / (1.0 + np.exp(-z))
        residual = p - y
        return nll, np.array([float(residual @ x), float(np.sum(residual))])

    result = optimize.minimize(nll_and_grad, x0=np.zeros(2), jac=True, method="BFGS")
    slope, intercept = result.x
    return LogisticCalibration(slope=float(slope), intercept=float(intercept))


def predict_baseline(
    calibration: LogisticCalibration,
    pairs: Sequence[MintedPair],
    n: int = 3,
    pad: bool = True,
) -> list[PredictionRecord]:
    """Calibrated probabilities for every pair, in input order."""
    out = []
    for row, pair in enumerate(pairs):
        sim = char_ngram_similarity(pair.spanish_1, pair.spanish_2, n, pad)
        pair_id = pair.id or f"pair-{row + 1}"
        out.append(PredictionRecord(pair_id=pair_id, probability=calibration.probability(sim)))
    return out
