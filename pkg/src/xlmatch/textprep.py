"""Tokenization, stopword consolidation, negation tagging, and vocabulary
repair rules shared by the miner and the matcher.

All operations are pure functions over immutable inputs. The stopword
delta, negation keywords, and explicit spelling fixes ship as plain-text
data files (one entry per line) so they can be overridden from the CLI.
"""

from __future__ import annotations

import itertools
import logging
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Container, Iterator, Mapping

from .errors import ValidationError

logger = logging.getLogger(__name__)

# Pathological tokens could hold dozens of toggleable characters; searching
# all subsets is exponential, so repair gives up beyond this many positions.
_MAX_TOGGLE_POSITIONS = 12

_ACCENT_TOGGLE = {
    "a": "á", "á": "a",
    "e": "é", "é": "e",
    "i": "í", "í": "i",
    "o": "ó", "ó": "o",
    "u": "ú", "ú": "u",
}
_BV_TOGGLE = {"b": "v", "v": "b"}


@dataclass(frozen=True)
class TokenSequence:
    """Lowercased tokens of one sentence, boundary punctuation stripped."""

    tokens: tuple[str, ...]
    original: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)


@dataclass(frozen=True)
class StopwordList:
    """A stopword set plus the consolidation delta applied to it."""

    words: frozenset[str]
    added: frozenset[str] = frozenset()
    removed: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.added & self.removed:
            raise ValidationError("stopword additions and removals overlap")
        if self.removed & self.words:
            raise ValidationError("removed stopwords still present in the list")
        if not self.added <= self.words:
            raise ValidationError("recorded additions missing from the list")

    def __contains__(self, token: str) -> bool:
        return token in self.words


@dataclass(frozen=True)
class RepairTable:
    """Spelling-repair rules anchored to an embedding vocabulary."""

    explicit_fixes: Mapping[str, str]
    vocabulary: Container[str]

    def __post_init__(self):
        bad = [w for w, fix in self.explicit_fixes.items() if fix not in self.vocabulary]
        if bad:
            raise ValidationError(
                f"explicit fixes map to out-of-vocabulary tokens: {sorted(bad)[:5]}"
            )


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_boundary_punctuation(chunk: str) -> str:
    start, end = 0, len(chunk)
    while start < end and _is_punctuation(chunk[start]):
        start += 1
    while end > start and _is_punctuation(chunk[end - 1]):
        end -= 1
    return chunk[start:end]


def tokenize(sentence: str) -> TokenSequence:
    """Lowercase and split on whitespace, stripping punctuation from token
    boundaries.

    Interior punctuation survives, so contractions like "i'm" stay one
    token; accents are preserved. Chunks that are punctuation-only vanish.
    """
    tokens = []
    for chunk in sentence.split():
        token = _strip_boundary_punctuation(chunk.casefold())
        if token:
            tokens.append(token)
    return TokenSequence(tuple(tokens), sentence)


def read_word_list(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def _read_packaged_list(name: str) -> list[str]:
    text = resources.files("xlmatch.data").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def load_stopwords(path=None) -> StopwordList:
    """Load a base stopword list (the packaged English list by default)."""
    words = read_word_list(path) if path is not None else _read_packaged_list("stopwords_en.txt")
    return StopwordList(words=frozenset(words))


def default_additions() -> frozenset[str]:
    return frozenset(_read_packaged_list("stopword_additions.txt"))


def default_removals() -> frozenset[str]:
    return frozenset(_read_packaged_list("stopword_removals.txt"))


def consolidate_stopwords(
    base: StopwordList,
    additions: frozenset[str] | None = None,
    removals: frozenset[str] | None = None,
) -> StopwordList:
    """Patch a base English stopword list with the omission/inclusion delta.

    By default adds the first-person/plural contraction family ("i'm",
    "i'll", "we've", ...) plus modal "would", and removes bare "re" and
    "again". Idempotent: consolidating an already-consolidated list is a
    no-op.
    """
    additions = frozenset(additions if additions is not None else default_additions())
    removals = frozenset(removals if removals is not None else default_removals())
    if additions & removals:
        raise ValidationError("stopword additions and removals overlap")
    return StopwordList(
        words=(base.words | additions) - removals,
        added=additions,
        removed=removals,
    )


def load_explicit_fixes(path=None) -> dict[str, str]:
    """Load misspelling -> canonical-token fixes, one tab-separated pair
    per line (packaged defaults if no path given)."""
    lines = (
        read_word_list(path) if path is not None else _read_packaged_list("explicit_fixes.txt")
    )
    fixes = {}
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ValidationError(f"bad explicit-fix entry (want 'wrong<TAB>right'): {line!r}")
        fixes[parts[0].strip()] = parts[1].strip()
    return fixes


def build_repair_table(fixes: Mapping[str, str], vocabulary: Container[str]) -> RepairTable:
    """Build a RepairTable, dropping fixes whose canonical form is not in
    this vocabulary (they could never be applied)."""
    usable = {w: fix for w, fix in fixes.items() if fix in vocabulary}
    dropped = sorted(set(fixes) - set(usable))
    if dropped:
        logger.warning("dropping %d explicit fixes with out-of-vocabulary targets: %s",
                       len(dropped), dropped[:5])
    return RepairTable(explicit_fixes=usable, vocabulary=vocabulary)


def _toggle_candidates(token: str, toggle: Mapping[str, str], vocabulary: Container[str]) -> str | None:
    """Search in-vocabulary variants of ``token`` produced by toggling any
    subset of the mapped characters, fewest changes first, ties broken
    lexicographically."""
    positions = [i for i, ch in enumerate(token) if ch in toggle]
    if not positions or len(positions) > _MAX_TOGGLE_POSITIONS:
        return None
    chars = list(token)
    for change_count in range(1, len(positions) + 1):
        hits = []
        for combo in itertools.combinations(positions, change_count):
            candidate = chars.copy()
            for i in combo:
                candidate[i] = toggle[candidate[i]]
            word = "".join(candidate)
            if word in vocabulary:
                hits.append(word)
        if hits:
            return min(hits)
    return None


def repair_token(token: str, table: RepairTable) -> str:
    """Map an out-of-vocabulary token to an in-vocabulary form if a repair
    rule applies.

    Rule order, first success wins: explicit fix, accent-variant search
    (toggling vowels between accented and plain forms), b/v substitution.
    In-vocabulary tokens pass through untouched, as do tokens nothing can
    repair. The result is always either the input or a vocabulary member.
    """
    if token in table.vocabulary:
        return token
    fix = table.explicit_fixes.get(token)
    if fix is not None:
        return fix
    for toggle in (_ACCENT_TOGGLE, _BV_TOGGLE):
        hit = _toggle_candidates(token, toggle, table.vocabulary)
        if hit is not None:
            return hit
    return token


def load_negations(path=None) -> frozenset[str]:
    """Load the negation keyword set (packaged defaults if no path given)."""
    entries = read_word_list(path) if path is not None else _read_packaged_list("negations.txt")
    return frozenset(entries)


_DEFAULT_NEGATIONS: frozenset[str] | None = None


def _default_negations() -> frozenset[str]:
    global _DEFAULT_NEGATIONS
    if _DEFAULT_NEGATIONS is None:
        _DEFAULT_NEGATIONS = load_negations()
    return _DEFAULT_NEGATIONS


def is_negation(token: str, negations: frozenset[str] | None = None) -> bool:
    """True iff the lowercase token is a negation keyword."""
    if negations is None:
        negations = _default_negations()
    return token in negations
