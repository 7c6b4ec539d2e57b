"""fastText-format word vectors, sequence encoding, and corpus statistics.

The loader reads the text .vec format: an optional "count dim" header
line, then one token plus ``dim`` space-separated decimals per line. Two
extra rows are appended to every table: an all-zero padding row and a
reserved out-of-vocabulary row.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, MintedPair, PairRecord, UnlabeledRecord
from .errors import DataFormatError, ValidationError
from .textprep import RepairTable, TokenSequence, repair_token, tokenize


@dataclass(frozen=True)
class EmbeddingTable:
    """Vocabulary plus the dense vector for each token.

    ``vectors`` has ``len(vocab) + 2`` rows: the file's tokens in file
    order, then the padding row (all zeros), then the OOV row.
    """

    dim: int
    vocab: dict[str, int]
    vectors: np.ndarray
    pad_index: int
    oov_index: int

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def lookup(self, token: str) -> int:
        """Row index for a token, falling back to the OOV row."""
        return self.vocab.get(token, self.oov_index)


@dataclass(frozen=True)
class EncodedSequence:
    """A sentence as a fixed-length row of vocabulary indices."""

    indices: tuple[int, ...]
    true_length: int


@dataclass(frozen=True)
class OovStats:
    """Token-length moments and out-of-vocabulary counts for one corpus.

    Moments are over raw tokenized sentences, before any repair, so they
    describe the data itself; std is the population standard deviation.
    """

    sentence_count: int
    pair_count: int
    max_tokens: int | None
    mean_tokens: float | None
    std_tokens: float | None
    oov_terms: int
    oov_sentences: int
    oov_pairs: int

    def as_dict(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "pair_count": self.pair_count,
            "max_tokens": self.max_tokens,
            "mean_tokens": self.mean_tokens,
            "std_tokens": self.std_tokens,
            "oov_terms": self.oov_terms,
            "oov_sentences": self.oov_sentences,
            "oov_pairs": self.oov_pairs,
        }


def _looks_like_header(parts: list[str]) -> bool:
    if len(parts) != 2:
        return False
    try:
        int(parts[0]), int(parts[1])
    except ValueError:
        return False
    return True


def load_embedding_table(path) -> EmbeddingTable:
    """Parse a fastText .vec text file into an EmbeddingTable.

    The dimension is taken from the header when present, otherwise from
    the first vector line; every later line must agree with it.
    """
    path = Path(path)
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim: int | None = None

    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            parts = [p for p in parts if p != ""]
            if lineno == 1 and _looks_like_header(parts):
                dim = int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DataFormatError(f"{path}:{lineno}: no vector values on first line")
            if len(values) != dim:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(values)}"
                )
            try:
                vector = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric vector value") from None
            if token in vocab:
                continue
            vocab[token] = len(rows)
            rows.append(vector)

    if dim is None:
        raise DataFormatError(f"{path}: empty embedding file")

    vectors = np.zeros((len(rows) + 2, dim), dtype=np.float32)
    if rows:
        vectors[: len(rows)] = np.stack(rows)
    pad_index = len(rows)
    oov_index = len(rows) + 1
    return EmbeddingTable(
        dim=dim, vocab=vocab, vectors=vectors, pad_index=pad_index, oov_index=oov_index
    )


def encode_sequence(
    tokens: TokenSequence | Sequence[str],
    table: EmbeddingTable,
    repair: RepairTable | None,
    max_len: int,
) -> EncodedSequence:
    """Map tokens to table indices, truncating to the first ``max_len``
    and post-padding with the padding row.

    Each token is repaired first when a repair table is given; tokens that
    stay out-of-vocabulary map to the OOV row.
    """
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    token_list = list(tokens.tokens if isinstance(tokens, TokenSequence) else tokens)
    token_list = token_list[:max_len]
    indices = []
    for token in token_list:
        if repair is not None:
            token = repair_token(token, repair)
        indices.append(table.lookup(token))
    true_length = len(indices)
    indices.extend([table.pad_index] * (max_len - true_length))
    return EncodedSequence(indices=tuple(indices), true_length=true_length)


def _record_sentences(record) -> list[str]:
    if isinstance(record, PairRecord):
        return [record.q1_src, record.q2_src]
    if isinstance(record, UnlabeledRecord):
        return [record.spanish]
    if isinstance(record, MintedPair):
        return [record.spanish_1, record.spanish_2]
    raise TypeError(f"cannot take statistics over {type(record).__name__}")


def compute_oov_stats(corpus: Corpus, table: EmbeddingTable) -> OovStats:
    """Token-length moments and OOV counts over a corpus.

    Pair files contribute both source-language questions per record;
    unlabeled files contribute the Spanish question. A pair counts as OOV
    when any of its sentences contains an OOV token.
    """
    lengths: list[int] = []
    oov_tokens: set[str] = set()
    oov_sentences = 0
    oov_pairs = 0

    for record in corpus:
        record_has_oov = False
        for sentence in _record_sentences(record):
            seq = tokenize(sentence)
            lengths.append(len(seq))
            missing = [t for t in seq if t not in table]
            if missing:
                oov_sentences += 1
                record_has_oov = True
                oov_tokens.update(missing)
        if record_has_oov:
            oov_pairs += 1

    if lengths:
        max_tokens = max(lengths)
        mean_tokens = statistics.fmean(lengths)
        std_tokens = statistics.pstdev(lengths)
    else:
        max_tokens = mean_tokens = std_tokens = None

    return OovStats(
        sentence_count=len(lengths),
        pair_count=len(corpus),
        max_tokens=max_tokens,
        mean_tokens=mean_tokens,
        std_tokens=std_tokens,
        oov_terms=len(oov_tokens),
        oov_sentences=oov_sentences,
        oov_pairs=oov_pairs,
    )
