"""Anatomical vocabularies and the report-term to detector-class mapping.

Two vocabularies are involved: the report-side anatomical terms (50 entries
in the shipped table) and the detector-side region classes (29 entries).
Each report term carries one curated mapping rule of one of three kinds:

- ``exact``: the term and a detector class name the same region,
- ``containment``: a detector class region fully encompasses the term,
- ``one_to_many``: the term covers several detector classes (e.g. an
  unsided structure covering its left and right halves); such rules also
  carry the per-target lexical substitutes used when splitting sentences.

The shipped table (``data/ontology.json``) is curated reference data, not a
learned artifact; it can be replaced by any file satisfying the same
structural invariants.
"""
from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

KIND_EXACT = "exact"
KIND_CONTAINMENT = "containment"
KIND_ONE_TO_MANY = "one_to_many"
_KINDS = (KIND_EXACT, KIND_CONTAINMENT, KIND_ONE_TO_MANY)

DEFAULT_SIZES = (50, 29)


class OntologyError(ValueError):
    """Base class for ontology validation failures; names the offending term."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class SizeMismatch(OntologyError):
    pass


class DanglingTarget(OntologyError):
    pass


class DuplicateRule(OntologyError):
    pass


class InvalidRule(OntologyError):
    pass


@dataclass(frozen=True)
class MappingRule:
    """One curated link from a report-side term to detector class(es)."""

    source: str
    kind: str
    targets: tuple[str, ...]
    subregion_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidRule(f"rule for {self.source!r}: unknown kind {self.kind!r}", self.source)
        if self.kind in (KIND_EXACT, KIND_CONTAINMENT):
            if len(self.targets) != 1:
                raise InvalidRule(
                    f"rule for {self.source!r}: kind {self.kind!r} requires exactly one target",
                    self.source,
                )
            if self.subregion_terms:
                raise InvalidRule(
                    f"rule for {self.source!r}: subregion_terms only allowed for one_to_many",
                    self.source,
                )
        else:
            if len(self.targets) < 2:
                raise InvalidRule(
                    f"rule for {self.source!r}: one_to_many requires at least two targets",
                    self.source,
                )
            if len(self.subregion_terms) != len(self.targets):
                raise InvalidRule(
                    f"rule for {self.source!r}: need one subregion term per target",
                    self.source,
                )


@dataclass(frozen=True)
class MappingResolution:
    """Outcome of resolving one report-side term; kind None means unmapped."""

    kind: str | None
    targets: tuple[str, ...] = ()
    subregion_terms: tuple[str, ...] = ()

    @property
    def mapped(self) -> bool:
        return self.kind is not None


UNMAPPED = MappingResolution(None)


@dataclass(frozen=True)
class Ontology:
    """Validated vocabularies plus at most one mapping rule per source term."""

    c_ana: frozenset[str]
    c_pre: frozenset[str]
    rules: Mapping[str, MappingRule] = field(default_factory=dict)


def resolve(region: str, ontology: Ontology) -> MappingResolution:
    """Return the curated resolution for a report-side term.

    Total and deterministic: unknown or rule-less terms resolve to UNMAPPED,
    never an error.
    """
    rule = ontology.rules.get(region)
    if rule is None:
        return UNMAPPED
    return MappingResolution(rule.kind, rule.targets, rule.subregion_terms)


def validate_ontology(ontology: Ontology, sizes: tuple[int, int] | None = DEFAULT_SIZES) -> None:
    """Check structural invariants; raises a named OntologyError on the first fault.

    `sizes` pins the expected (report-term, detector-class) cardinalities;
    pass None to skip the cardinality check (small test tables).
    """
    if sizes is not None:
        expected_ana, expected_pre = sizes
        if len(ontology.c_ana) != expected_ana:
            raise SizeMismatch(
                f"anatomical vocabulary has {len(ontology.c_ana)} terms, expected {expected_ana}"
            )
        if len(ontology.c_pre) != expected_pre:
            raise SizeMismatch(
                f"detector vocabulary has {len(ontology.c_pre)} classes, expected {expected_pre}"
            )
    for source, rule in ontology.rules.items():
        if source != rule.source:
            raise InvalidRule(f"rule keyed {source!r} but names source {rule.source!r}", source)
        if source not in ontology.c_ana:
            raise DanglingTarget(f"rule source {source!r} not in the anatomical vocabulary", source)
        for target in rule.targets:
            if target not in ontology.c_pre:
                raise DanglingTarget(
                    f"rule for {source!r} targets unknown detector class {target!r}", target
                )


def parse_ontology(doc: dict, sizes: tuple[int, int] | None = DEFAULT_SIZES) -> Ontology:
    """Build and validate an Ontology from a parsed JSON/TOML document."""
    try:
        c_ana_list = [str(t) for t in doc["c_ana"]]
        c_pre_list = [str(t) for t in doc["c_pre"]]
        raw_rules = doc.get("rules", [])
    except (KeyError, TypeError) as exc:
        raise InvalidRule(f"malformed ontology document: {exc}") from exc

    for name, terms in (("c_ana", c_ana_list), ("c_pre", c_pre_list)):
        dupes = {t for t in terms if terms.count(t) > 1}
        if dupes:
            raise DuplicateRule(f"duplicate {name} term {sorted(dupes)[0]!r}", sorted(dupes)[0])

    rules: dict[str, MappingRule] = {}
    for raw in raw_rules:
        rule = MappingRule(
            source=str(raw["source"]),
            kind=str(raw["kind"]),
            targets=tuple(str(t) for t in raw["targets"]),
            subregion_terms=tuple(str(t) for t in raw.get("subregion_terms", ())),
        )
        if rule.source in rules:
            raise DuplicateRule(f"two rules for source {rule.source!r}", rule.source)
        rules[rule.source] = rule

    ontology = Ontology(frozenset(c_ana_list), frozenset(c_pre_list), rules)
    validate_ontology(ontology, sizes=sizes)
    return ontology


def load_ontology(path: str | Path, sizes: tuple[int, int] | None = DEFAULT_SIZES) -> Ontology:
    """Load an ontology file (JSON, or TOML when the suffix is .toml)."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_ontology(doc, sizes=sizes)


def serialize_ontology(ontology: Ontology) -> str:
    """Canonical JSON form: sorted vocabularies, rules sorted by source."""
    doc = {
        "c_ana": sorted(ontology.c_ana),
        "c_pre": sorted(ontology.c_pre),
        "rules": [
            {
                "source": rule.source,
                "kind": rule.kind,
                "targets": list(rule.targets),
                **(
                    {"subregion_terms": list(rule.subregion_terms)}
                    if rule.kind == KIND_ONE_TO_MANY
                    else {}
                ),
            }
            for _, rule in sorted(ontology.rules.items())
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def default_ontology_text() -> str:
    return resources.files("radalign.data").joinpath("ontology.json").read_text(encoding="utf-8")


def load_default_ontology() -> Ontology:
    """The shipped 50-term / 29-class table."""
    return parse_ontology(json.loads(default_ontology_text()))
