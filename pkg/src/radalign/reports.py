"""Report sentence splitting and lexicon-driven triplet extraction.

A report decomposes into sentences, and each sentence into zero or more
``(region, finding, existence)`` triplets found by a longest-match scan over
a curated lexicon. Extraction is purely lexical and deterministic: the same
sentence and lexicon always produce the same triplets in the same order.
Hedged findings ("possible", "may represent") count as present; only an
explicit negation cue before the finding flips existence to absent.
"""
from __future__ import annotations

import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .ontology import Ontology

EXIST = "exist"
ABSENT = "absent"


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Sentence:
    """One sentence with its [start, end) character span in the report text."""

    index: int
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Report:
    id: str
    text: str
    sentences: tuple[Sentence, ...]

    @classmethod
    def from_text(cls, report_id: str, text: str) -> "Report":
        return cls(report_id, text, tuple(split_sentences(text)))


@dataclass(frozen=True)
class Triplet:
    """One ``<anatomical region, finding, existence>`` unit from a sentence."""

    region: str
    finding: str
    existence: str
    source_sentence: int

    def as_record(self, report_id: str) -> dict:
        return {
            "id": report_id,
            "sentence_index": self.source_sentence,
            "region": self.region,
            "finding": self.finding,
            "existence": self.existence,
        }


@dataclass(frozen=True)
class Lexicon:
    """Surface-form tables driving extraction, plus the disease-class list.

    All surface forms are lowercase and whitespace-normalized. ``classes``
    fixes the disease-class ordering used for tag vectors.
    """

    region_terms: Mapping[str, str]
    finding_terms: Mapping[str, str]
    negation_cues: tuple[str, ...]
    classes: tuple[str, ...]
    default_regions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for surface in list(self.region_terms) + list(self.finding_terms) + list(self.negation_cues):
            if surface != _normalize_surface(surface):
                raise LexiconError(f"surface form {surface!r} is not normalized")
        for surface, finding in self.finding_terms.items():
            if finding not in self.classes:
                raise LexiconError(
                    f"finding term {surface!r} maps to {finding!r}, not a known disease class"
                )
        for finding, region in self.default_regions.items():
            if finding not in self.classes:
                raise LexiconError(f"default region given for unknown finding {finding!r}")
            if region not in self.region_terms.values():
                raise LexiconError(
                    f"default region {region!r} for {finding!r} is not a mapped region term"
                )


def _normalize_surface(surface: str) -> str:
    return " ".join(surface.lower().split())


_SENTENCE_END = re.compile(r"[.!?]")
_WORD = re.compile(r"[a-z0-9]+")


def split_sentences(text: str) -> list[Sentence]:
    """Split on '.', '!' or '?' followed by whitespace or end of text.

    Fragments are trimmed of surrounding whitespace (the terminator stays);
    fragments without word characters are dropped. Each sentence's text
    equals ``text[start:end]`` exactly.
    """
    sentences: list[Sentence] = []
    cursor = 0
    n = len(text)

    def emit(start: int, end: int) -> None:
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        piece = text[start:end]
        if not _WORD.search(piece.lower()):
            return
        sentences.append(Sentence(len(sentences), piece, start, end))

    for match in _SENTENCE_END.finditer(text):
        end = match.end()
        if end < n and not text[end].isspace():
            continue  # e.g. a decimal point
        emit(cursor, end)
        cursor = end
    emit(cursor, n)
    return sentences


@dataclass(frozen=True)
class _Match:
    category: str  # "negation" | "region" | "finding"
    payload: str
    token_start: int
    token_end: int


def _tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def _term_index(terms: Sequence[str]) -> dict[tuple[str, ...], str]:
    return {tuple(_tokenize(t)): t for t in terms}


def _scan(tokens: list[str], lexicon: Lexicon) -> list[_Match]:
    # Longest match wins at each position; on equal length the category
    # priority is negation > region > finding. Matched tokens are consumed.
    tables = (
        ("negation", {tuple(_tokenize(c)): c for c in lexicon.negation_cues}),
        ("region", {tuple(_tokenize(s)): canon for s, canon in lexicon.region_terms.items()}),
        ("finding", {tuple(_tokenize(s)): canon for s, canon in lexicon.finding_terms.items()}),
    )
    max_len = max((len(key) for _, table in tables for key in table), default=1)

    matches: list[_Match] = []
    i = 0
    while i < len(tokens):
        hit = None
        for length in range(min(max_len, len(tokens) - i), 0, -1):
            key = tuple(tokens[i : i + length])
            for category, table in tables:
                if key in table:
                    hit = _Match(category, table[key], i, i + length)
                    break
            if hit is not None:
                break
        if hit is None:
            i += 1
        else:
            matches.append(hit)
            i = hit.token_end
    return matches


def extract_triplets(
    sentence: Sentence,
    lexicon: Lexicon,
    diagnostics: list[dict] | None = None,
) -> list[Triplet]:
    """Extract triplets from one sentence.

    Each finding is paired with the nearest region term in the sentence
    (token distance; ties prefer the earlier region), falling back to the
    lexicon's default region for that finding. A finding with neither gets
    a diagnostic record and no triplet. Existence is absent iff a negation
    cue occurs anywhere before the finding in the sentence. At most one
    triplet per (region, finding) is kept (first occurrence).
    """
    tokens = _tokenize(sentence.text)
    matches = _scan(tokens, lexicon)
    regions = [m for m in matches if m.category == "region"]
    findings = [m for m in matches if m.category == "finding"]
    negation_positions = [m.token_start for m in matches if m.category == "negation"]

    triplets: list[Triplet] = []
    seen: set[tuple[str, str]] = set()
    for finding in findings:
        region_term = None
        if regions:
            def distance(region: _Match) -> int:
                if region.token_end <= finding.token_start:
                    return finding.token_start - region.token_end
                return region.token_start - finding.token_end

            nearest = min(regions, key=lambda r: (distance(r), r.token_start))
            region_term = nearest.payload
        elif finding.payload in lexicon.default_regions:
            region_term = lexicon.default_regions[finding.payload]

        if region_term is None:
            if diagnostics is not None:
                diagnostics.append(
                    {
                        "sentence_index": sentence.index,
                        "finding": finding.payload,
                        "reason": "no_region",
                    }
                )
            continue

        key = (region_term, finding.payload)
        if key in seen:
            continue
        seen.add(key)
        negated = any(pos < finding.token_start for pos in negation_positions)
        triplets.append(
            Triplet(
                region=region_term,
                finding=finding.payload,
                existence=ABSENT if negated else EXIST,
                source_sentence=sentence.index,
            )
        )
    return triplets


def tags_from_triplets(triplets: Sequence[Triplet], classes: Sequence[str]) -> np.ndarray:
    """Binary disease-presence vector: bit j set iff class j exists in some triplet."""
    index = {cls: j for j, cls in enumerate(classes)}
    bits = np.zeros(len(classes), dtype=np.int64)
    for triplet in triplets:
        if triplet.finding not in index:
            raise LexiconError(f"finding {triplet.finding!r} is not a known disease class")
        if triplet.existence == EXIST:
            bits[index[triplet.finding]] = 1
    return bits


@dataclass(frozen=True)
class ParsedReport:
    """A report with its triplets, tag vector, and extraction diagnostics."""

    report: Report
    triplets: tuple[Triplet, ...]
    tags: np.ndarray
    diagnostics: tuple[dict, ...] = ()


def parse_report(report: Report, lexicon: Lexicon) -> ParsedReport:
    diagnostics: list[dict] = []
    triplets: list[Triplet] = []
    for sentence in report.sentences:
        triplets.extend(extract_triplets(sentence, lexicon, diagnostics))
    return ParsedReport(
        report=report,
        triplets=tuple(triplets),
        tags=tags_from_triplets(triplets, lexicon.classes),
        diagnostics=tuple(diagnostics),
    )


def parse_lexicon(doc: dict) -> Lexicon:
    try:
        return Lexicon(
            region_terms={
                _normalize_surface(k): str(v) for k, v in doc["region_terms"].items()
            },
            finding_terms={
                _normalize_surface(k): str(v) for k, v in doc["finding_terms"].items()
            },
            negation_cues=tuple(_normalize_surface(c) for c in doc["negation_cues"]),
            classes=tuple(str(c) for c in doc["classes"]),
            default_regions={str(k): str(v) for k, v in doc.get("default_regions", {}).items()},
        )
    except (KeyError, TypeError) as exc:
        raise LexiconError(f"malformed lexicon document: {exc}") from exc


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a lexicon file (JSON, or TOML when the suffix is .toml)."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_lexicon(doc)


def validate_lexicon(lexicon: Lexicon, ontology: Ontology) -> None:
    """Every mapped region term must exist in the anatomical vocabulary."""
    for surface, region in lexicon.region_terms.items():
        if region not in ontology.c_ana:
            raise LexiconError(
                f"region term {surface!r} maps to {region!r}, "
                "not in the anatomical vocabulary"
            )


def load_default_lexicon() -> Lexicon:
    """The shipped lexicon (region/finding surfaces, negation cues, 14 classes)."""
    text = resources.files("radalign.data").joinpath("lexicon.json").read_text(encoding="utf-8")
    return parse_lexicon(json.loads(text))
