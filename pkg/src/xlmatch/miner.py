"""Mint labeled Spanish training pairs from unlabeled parallel data.

English translations act as the link: two Spanish questions whose English
sides collide under a bag-of-words normalization hash are taken to mean
the same thing. Stage 1 pairs up unlabeled questions with equal hashes;
stage 2 substitutes hash-equal unlabeled questions into ground-truth
pairs, inheriting the label. An audit pass measures how precise the hash
join is against ground truth.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .corpus import Corpus, MintedPair, PairRecord, Provenance, UnlabeledRecord
from .errors import ValidationError
from .textprep import StopwordList, is_negation, tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizedKey:
    """Canonical bag-of-words hash of an English sentence.

    The key is the space-joined, lexicographically sorted token multiset
    after dropping stopwords and pure-digit tokens and collapsing any
    number of negation keywords into a single "no" marker. An empty key
    never matches anything.
    """

    key: str
    source_sentence: str

    def __bool__(self) -> bool:
        return bool(self.key)


def normalize_key(
    sentence: str,
    stopwords: StopwordList,
    negations: frozenset[str] | None = None,
) -> NormalizedKey:
    """Hash a sentence to its normalized bag-of-words key.

    Negation keywords are checked before the stopword filter so that a
    stopword list containing "not" etc. cannot swallow the negation
    signal.
    """
    kept = []
    negated = False
    for token in tokenize(sentence):
        if is_negation(token, negations):
            negated = True
        elif token in stopwords:
            continue
        elif token.isascii() and token.isdigit():
            continue
        else:
            kept.append(token)
    if negated:
        kept.append("no")
    return NormalizedKey(key=" ".join(sorted(kept)), source_sentence=sentence)


@dataclass(frozen=True)
class MiningReport:
    """Counts from the audit pass and/or a minting run."""

    recovered_true: int = 0
    recovered_false: int = 0
    total_minted: int = 0
    minted_positive: int = 0
    minted_negative: int = 0
    per_provenance: dict[str, int] = field(default_factory=dict)

    @property
    def relative_precision(self) -> float | None:
        """Fraction of recovered pairs whose ground-truth label is 1;
        absent when nothing was recovered."""
        recovered = self.recovered_true + self.recovered_false
        if recovered == 0:
            return None
        return self.recovered_true / recovered

    def as_dict(self) -> dict:
        return {
            "recovered_true": self.recovered_true,
            "recovered_false": self.recovered_false,
            "relative_precision": self.relative_precision,
            "total_minted": self.total_minted,
            "minted_positive": self.minted_positive,
            "minted_negative": self.minted_negative,
            "per_provenance": dict(self.per_provenance),
        }


def _unordered(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def mine_stage1(
    unlabeled: Corpus,
    stopwords: StopwordList,
    negations: frozenset[str] | None = None,
) -> list[MintedPair]:
    """Pair up unlabeled Spanish questions whose English translations share
    a non-empty normalized key; every such pair is a positive."""
    groups: dict[str, list[UnlabeledRecord]] = {}
    for rec in unlabeled:
        key = normalize_key(rec.english_translation, stopwords, negations)
        if key:
            groups.setdefault(key.key, []).append(rec)

    minted = []
    seen: set[tuple[str, str]] = set()
    for records in groups.values():
        if len(records) < 2:
            continue
        for a, b in combinations(records, 2):
            if a.spanish == b.spanish:
                continue
            pair_key = _unordered(a.spanish, b.spanish)
            if pair_key in seen:
                continue
            seen.add(pair_key)
            minted.append(
                MintedPair(a.spanish, b.spanish, label=1, provenance=Provenance.STAGE1_UNLABELED)
            )
    return minted


def mine_stage2(
    labeled: Corpus | Sequence[PairRecord],
    unlabeled: Corpus,
    stopwords: StopwordList,
    negations: frozenset[str] | None = None,
) -> list[MintedPair]:
    """Expand ground-truth pairs with hash-matching unlabeled questions.

    For each labeled pair and each of its sides, every unlabeled record
    whose English key equals that side's English key yields a new pair
    with the unlabeled record's Spanish question substituted on that side
    and the original label kept.
    """
    index: dict[str, list[UnlabeledRecord]] = {}
    for rec in unlabeled:
        key = normalize_key(rec.english_translation, stopwords, negations)
        if key:
            index.setdefault(key.key, []).append(rec)

    minted = []
    seen: set[tuple[str, str, int]] = set()
    for rec in labeled:
        if not rec.spanish_1.strip() or not rec.spanish_2.strip():
            raise ValidationError(
                f"record {rec.id}: stage-2 mining needs Spanish translations on both sides"
            )
        for side in (1, 2):
            english = rec.english_1 if side == 1 else rec.english_2
            key = normalize_key(english, stopwords, negations)
            if not key:
                continue
            for match in index.get(key.key, ()):
                if side == 1:
                    s1, s2 = match.spanish, rec.spanish_2
                else:
                    s1, s2 = rec.spanish_1, match.spanish
                if s1 == s2:
                    continue
                pair_key = (*_unordered(s1, s2), rec.label)
                if pair_key in seen:
                    continue
                seen.add(pair_key)
                minted.append(
                    MintedPair(s1, s2, label=rec.label, provenance=Provenance.STAGE2_EXPANSION)
                )
    return minted


def audit_relative_precision(
    labeled: Corpus,
    stopwords: StopwordList,
    negations: frozenset[str] | None = None,
) -> MiningReport:
    """Measure the hash join against ground truth.

    A labeled pair is "recovered" when both its English sides hash to the
    same non-empty key; relative precision is the recovered fraction that
    is truly a match.
    """
    recovered_true = recovered_false = 0
    for rec in labeled:
        k1 = normalize_key(rec.english_1, stopwords, negations)
        k2 = normalize_key(rec.english_2, stopwords, negations)
        if k1 and k1.key == k2.key:
            if rec.label == 1:
                recovered_true += 1
            else:
                recovered_false += 1
    return MiningReport(recovered_true=recovered_true, recovered_false=recovered_false)


def _labeled_to_minted(records: Iterable[PairRecord], provenance: Provenance) -> list[MintedPair]:
    """Project labeled pairs onto their Spanish sides, skipping records
    that cannot form a valid Spanish pair."""
    out = []
    for rec in records:
        s1 = rec.spanish_1
        s2 = rec.spanish_2
        if not s1.strip() or not s2.strip():
            logger.warning("skipping %s: missing a Spanish side", rec.id)
            continue
        if s1 == s2:
            logger.debug("skipping %s: identical Spanish sentences", rec.id)
            continue
        out.append(MintedPair(s1, s2, label=rec.label, provenance=provenance))
    return out


def build_training_set(
    labeled_en: Corpus,
    labeled_es: Corpus,
    unlabeled: Corpus,
    stopwords: StopwordList,
    negations: frozenset[str] | None = None,
) -> Corpus:
    """Assemble the full minted training corpus.

    Sources, in deduplication-precedence order: native Spanish labeled
    pairs, Spanish translations of English labeled pairs, stage-2
    expansions, stage-1 unlabeled matches. Duplicates (by unordered
    sentence pair) keep the first occurrence; pairs that appear with
    conflicting labels are dropped entirely and logged.
    """
    sources = (
        _labeled_to_minted(labeled_es, Provenance.NATIVE_LABELED)
        + _labeled_to_minted(labeled_en, Provenance.TRANSLATION_OF_LABELED)
        + mine_stage2(
            list(labeled_en.records) + list(labeled_es.records),
            unlabeled,
            stopwords,
            negations,
        )
        + mine_stage1(unlabeled, stopwords, negations)
    )

    first: dict[tuple[str, str], MintedPair] = {}
    conflicted: set[tuple[str, str]] = set()
    for pair in sources:
        key = pair.unordered()
        kept = first.get(key)
        if kept is None:
            first[key] = pair
        elif kept.label != pair.label:
            conflicted.add(key)

    records = []
    for key, pair in first.items():
        if key in conflicted:
            logger.warning("dropping pair with conflicting labels: %r / %r", key[0], key[1])
            continue
        records.append(pair)

    records = [
        MintedPair(p.spanish_1, p.spanish_2, p.label, p.provenance, id=f"minted-{i}")
        for i, p in enumerate(records, start=1)
    ]
    return Corpus(tuple(records), source_file="")


def count_minted(pairs: Corpus | Sequence[MintedPair]) -> MiningReport:
    """Summarize a minted corpus as a MiningReport (no audit fields)."""
    labels = Counter()
    provenance = Counter()
    total = 0
    for pair in pairs:
        total += 1
        labels[pair.label] += 1
        if pair.provenance is not None:
            provenance[pair.provenance.value] += 1
    return MiningReport(
        total_minted=total,
        minted_positive=labels[1],
        minted_negative=labels[0],
        per_provenance=dict(provenance),
    )
