"""Record types and readers/writers for the tab-separated question-pair files.

All files are UTF-8 without BOM, tab-delimited, one record per line, no
quoting. Record ids are synthesized as ``<file stem>-<1-based line number>``
so downstream stages can join on them; parsing the same file always yields
the same ids.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

from .errors import ParseError, ValidationError


class Lang(enum.Enum):
    """Source language of a labeled pair file."""

    ENGLISH = "english"
    SPANISH = "spanish"


class Provenance(enum.Enum):
    """How a minted training pair was obtained."""

    NATIVE_LABELED = "native_labeled"
    TRANSLATION_OF_LABELED = "translation_of_labeled"
    STAGE2_EXPANSION = "stage2_expansion"
    STAGE1_UNLABELED = "stage1_unlabeled"


@dataclass(frozen=True)
class PairRecord:
    """One labeled question pair with its translations.

    Column layout is (source, translation, source, translation, label);
    ``lang`` names the source language, so for English files q1_src is
    English and q1_trans its Spanish translation, and vice versa for
    Spanish files.
    """

    id: str
    q1_src: str
    q1_trans: str
    q2_src: str
    q2_trans: str
    label: int
    lang: Lang

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"record {self.id}: label must be 0 or 1, got {self.label!r}")
        if not self.q1_src.strip() or not self.q2_src.strip():
            raise ValidationError(f"record {self.id}: source questions must be non-empty")

    @property
    def english_1(self) -> str:
        return self.q1_src if self.lang is Lang.ENGLISH else self.q1_trans

    @property
    def english_2(self) -> str:
        return self.q2_src if self.lang is Lang.ENGLISH else self.q2_trans

    @property
    def spanish_1(self) -> str:
        return self.q1_trans if self.lang is Lang.ENGLISH else self.q1_src

    @property
    def spanish_2(self) -> str:
        return self.q2_trans if self.lang is Lang.ENGLISH else self.q2_src


@dataclass(frozen=True)
class UnlabeledRecord:
    """An unlabeled Spanish question with its English translation."""

    id: str
    spanish: str
    english_translation: str

    def __post_init__(self):
        if not self.spanish.strip() or not self.english_translation.strip():
            raise ValidationError(f"record {self.id}: both fields must be non-empty")


@dataclass(frozen=True)
class MintedPair:
    """A labeled Spanish question pair produced by mining or translation.

    ``label`` may be None only for prediction inputs parsed from files
    without a label column; training rejects unlabeled pairs.
    """

    spanish_1: str
    spanish_2: str
    label: int | None
    provenance: Provenance | None = None
    id: str | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(f"minted pair: label must be 0 or 1, got {self.label!r}")
        if self.spanish_1 == self.spanish_2:
            raise ValidationError("minted pair: the two sentences must differ")

    def unordered(self) -> tuple[str, str]:
        """Canonical key for deduplication; ignores sentence order."""
        a, b = self.spanish_1, self.spanish_2
        return (a, b) if a <= b else (b, a)


Record = Union[PairRecord, UnlabeledRecord, MintedPair]


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of records read from one file."""

    records: tuple[Record, ...]
    source_file: str = ""

    def __post_init__(self):
        ids = [r.id for r in self.records if r.id is not None]
        if len(ids) != len(set(ids)):
            seen, dupes = set(), set()
            for i in ids:
                (dupes if i in seen else seen).add(i)
            raise ValidationError(f"duplicate record ids in corpus: {sorted(dupes)[:5]}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _data_lines(path: Path, skip_header: bool) -> Iterator[tuple[int, str]]:
    """Yield (1-based physical line number, line) pairs, skipping the
    trailing newline's empty last element."""
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if skip_header and lineno == 1:
            continue
        yield lineno, line


def _split_columns(path: Path, lineno: int, line: str, expected: int) -> list[str]:
    cols = line.split("\t")
    if len(cols) != expected:
        raise ParseError(
            f"{path}:{lineno}: expected {expected} tab-separated columns, got {len(cols)}"
        )
    return cols


def _parse_label(path: Path, lineno: int, raw: str) -> int:
    raw = raw.strip()
    if raw not in ("0", "1"):
        raise ValidationError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
    return int(raw)


def parse_pair_file(path, lang: Lang, skip_header: bool = False) -> Corpus:
    """Read a labeled 5-column pair file.

    Columns: question 1, its translation, question 2, its translation,
    label. ``lang`` declares which language the source questions are in.
    """
    path = Path(path)
    records = []
    for lineno, line in _data_lines(path, skip_header):
        cols = _split_columns(path, lineno, line, 5)
        try:
            rec = PairRecord(
                id=f"{path.stem}-{lineno}",
                q1_src=cols[0],
                q1_trans=cols[1],
                q2_src=cols[2],
                q2_trans=cols[3],
                label=_parse_label(path, lineno, cols[4]),
                lang=lang,
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        records.append(rec)
    return Corpus(tuple(records), source_file=str(path))


def parse_unlabeled_file(path, skip_header: bool = False) -> Corpus:
    """Read a 2-column file of Spanish questions and English translations."""
    path = Path(path)
    records = []
    for lineno, line in _data_lines(path, skip_header):
        cols = _split_columns(path, lineno, line, 2)
        try:
            rec = UnlabeledRecord(
                id=f"{path.stem}-{lineno}",
                spanish=cols[0],
                english_translation=cols[1],
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        records.append(rec)
    return Corpus(tuple(records), source_file=str(path))


def parse_minted_file(path, skip_header: bool = False, require_label: bool = True) -> Corpus:
    """Read a minted-pair file: sentence 1, sentence 2[, label[, provenance]].

    With ``require_label=False`` a bare 2-column pair file (e.g. a test
    split to be predicted) is accepted and labels are left absent.
    """
    path = Path(path)
    records = []
    for lineno, line in _data_lines(path, skip_header):
        cols = line.split("\t")
        if len(cols) not in (2, 3, 4):
            raise ParseError(
                f"{path}:{lineno}: expected 2 to 4 tab-separated columns, got {len(cols)}"
            )
        if len(cols) == 2 and require_label:
            raise ParseError(f"{path}:{lineno}: missing label column")
        label = _parse_label(path, lineno, cols[2]) if len(cols) >= 3 else None
        provenance = None
        if len(cols) == 4 and cols[3].strip():
            try:
                provenance = Provenance(cols[3].strip())
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: unknown provenance {cols[3]!r}"
                ) from None
        try:
            rec = MintedPair(
                spanish_1=cols[0],
                spanish_2=cols[1],
                label=label,
                provenance=provenance,
                id=f"{path.stem}-{lineno}",
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        records.append(rec)
    return Corpus(tuple(records), source_file=str(path))


def _clean_field(text: str) -> str:
    """Make a sentence safe for the tab-separated format.

    Embedded tabs and newlines are replaced by single spaces; this is a
    documented lossy normalization that keeps the files machine-parseable
    without quoting rules.
    """
    return text.replace("\t", " ").replace("\r", " ").replace("\n", " ")


def write_pair_file(corpus: Corpus, path) -> None:
    """Write a corpus of PairRecord back to the 5-column format.

    Round-trips with :func:`parse_pair_file` field-for-field (ids included
    whenever the destination file stem matches the one ids were minted
    from).
    """
    path = Path(path)
    lines = []
    for rec in corpus:
        if not isinstance(rec, PairRecord):
            raise TypeError(f"write_pair_file needs PairRecord, got {type(rec).__name__}")
        lines.append(
            "\t".join(
                [
                    _clean_field(rec.q1_src),
                    _clean_field(rec.q1_trans),
                    _clean_field(rec.q2_src),
                    _clean_field(rec.q2_trans),
                    str(rec.label),
                ]
            )
        )
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_minted_file(pairs: Sequence[MintedPair] | Corpus, path) -> None:
    """Write minted pairs as sentence 1, sentence 2, label, provenance."""
    path = Path(path)
    lines = []
    for rec in pairs:
        if not isinstance(rec, MintedPair):
            raise TypeError(f"write_minted_file needs MintedPair, got {type(rec).__name__}")
        if rec.label is None:
            raise ValidationError("cannot write a minted pair without a label")
        provenance = rec.provenance.value if rec.provenance is not None else ""
        lines.append(
            "\t".join(
                [
                    _clean_field(rec.spanish_1),
                    _clean_field(rec.spanish_2),
                    str(rec.label),
                    provenance,
                ]
            )
        )
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
