#!/usr/bin/env python3
"""Resolve report-side anatomy terms onto detector-side region classes."""
from radalign import load_default_ontology, resolve
from radalign.ontology import SizeMismatch, parse_ontology, serialize_ontology
import json

ontology = load_default_ontology()
print(f"vocabularies: {len(ontology.c_ana)} report terms -> "
      f"{len(ontology.c_pre)} detector classes, {len(ontology.rules)} rules\n")

# One example per mapping kind, plus an unknown term.
for term in ("right hilar", "right ventricle", "diaphragm unspec", "lungs", "gallbladder"):
    res = resolve(term, ontology)
    if not res.mapped:
        print(f"{term!r}: unmapped (no rule; not an error)")
    elif res.kind == "one_to_many":
        print(f"{term!r}: one_to_many -> {list(res.targets)}")
        print(f"    sentence substitutes: {list(res.subregion_terms)}")
    else:
        print(f"{term!r}: {res.kind} -> {res.targets[0]}")

# Rule-kind census.
kinds = {}
for rule in ontology.rules.values():
    kinds[rule.kind] = kinds.get(rule.kind, 0) + 1
print(f"\nrule kinds: {kinds}")

# Validation rejects structurally broken tables.
doc = json.loads(serialize_ontology(ontology))
doc["c_pre"] = doc["c_pre"][:-1]
try:
    parse_ontology(doc)
except SizeMismatch as exc:
    print(f"\nmutated table rejected: SizeMismatch: {exc}")

# The canonical serializer is stable: serialize(parse(serialize(x))) == serialize(x).
text = serialize_ontology(ontology)
assert serialize_ontology(parse_ontology(json.loads(text))) == text
print("canonical serialization round-trips byte-identically")
