import json

import pytest

from radalign.ontology import (
    DanglingTarget,
    DuplicateRule,
    InvalidRule,
    MappingRule,
    SizeMismatch,
    load_default_ontology,
    load_ontology,
    parse_ontology,
    resolve,
    serialize_ontology,
)


@pytest.fixture(scope="module")
def ontology():
    return load_default_ontology()


class TestShippedTable:
    def test_cardinalities(self, ontology):
        assert len(ontology.c_ana) == 50
        assert len(ontology.c_pre) == 29

    def test_every_term_has_a_rule(self, ontology):
        assert set(ontology.rules) == ontology.c_ana

    def test_exact_scenario(self, ontology):
        res = resolve("right hilar", ontology)
        assert res.kind == "exact"
        assert res.targets == ("right hilar structures",)

    def test_containment_scenario(self, ontology):
        res = resolve("right ventricle", ontology)
        assert res.kind == "containment"
        assert res.targets == ("cardiac silhouette",)

    def test_one_to_many_scenario(self, ontology):
        res = resolve("diaphragm unspec", ontology)
        assert res.kind == "one_to_many"
        assert res.targets == ("left diaphragm", "right diaphragm")
        assert res.subregion_terms == ("left diaphragm", "right diaphragm")

    def test_unknown_term_is_unmapped(self, ontology):
        res = resolve("mediastinum xyz", ontology)
        assert not res.mapped
        assert res.targets == ()

    def test_resolve_total_over_vocabulary(self, ontology):
        for term in sorted(ontology.c_ana):
            assert resolve(term, ontology).mapped

    def test_resolve_deterministic(self, ontology):
        assert resolve("lungs", ontology) == resolve("lungs", ontology)


def _tiny_doc():
    return {
        "c_ana": ["left lung", "right lung", "lung"],
        "c_pre": ["left lung", "right lung"],
        "rules": [
            {"source": "left lung", "kind": "exact", "targets": ["left lung"]},
            {"source": "right lung", "kind": "exact", "targets": ["right lung"]},
            {"source": "lung", "kind": "one_to_many",
             "targets": ["left lung", "right lung"],
             "subregion_terms": ["left lung", "right lung"]},
        ],
    }


class TestValidation:
    def test_tiny_table_parses_without_size_pin(self):
        ontology = parse_ontology(_tiny_doc(), sizes=None)
        assert resolve("lung", ontology).kind == "one_to_many"

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            parse_ontology(_tiny_doc(), sizes=(50, 29))

    def test_dangling_target(self):
        doc = _tiny_doc()
        doc["rules"][0]["targets"] = ["flux capacitor"]
        with pytest.raises(DanglingTarget, match="flux capacitor"):
            parse_ontology(doc, sizes=None)

    def test_unknown_source_rejected(self):
        doc = _tiny_doc()
        doc["rules"][0]["source"] = "spleen"
        with pytest.raises(DanglingTarget, match="spleen"):
            parse_ontology(doc, sizes=None)

    def test_duplicate_rule(self):
        doc = _tiny_doc()
        doc["rules"].append({"source": "left lung", "kind": "exact", "targets": ["left lung"]})
        with pytest.raises(DuplicateRule, match="left lung"):
            parse_ontology(doc, sizes=None)

    def test_exact_rule_needs_single_target(self):
        with pytest.raises(InvalidRule):
            MappingRule("lung", "exact", ("left lung", "right lung"))

    def test_one_to_many_needs_two_targets(self):
        with pytest.raises(InvalidRule):
            MappingRule("lung", "one_to_many", ("left lung",), ("left lung",))

    def test_one_to_many_needs_matching_subregion_terms(self):
        with pytest.raises(InvalidRule):
            MappingRule("lung", "one_to_many", ("left lung", "right lung"), ("left lung",))

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidRule):
            MappingRule("lung", "fuzzy", ("left lung",))


class TestSerialization:
    def test_round_trip_preserves_content(self, ontology):
        text = serialize_ontology(ontology)
        again = parse_ontology(json.loads(text))
        assert again == ontology

    def test_canonical_form_is_stable(self, ontology):
        text = serialize_ontology(ontology)
        again = parse_ontology(json.loads(text))
        assert serialize_ontology(again) == text

    def test_shipped_file_round_trips(self, tmp_path, ontology):
        path = tmp_path / "ontology.json"
        path.write_text(serialize_ontology(ontology), encoding="utf-8")
        assert load_ontology(path) == ontology

    def test_toml_loading(self, tmp_path):
        doc = _tiny_doc()
        lines = [
            'c_ana = ["left lung", "right lung", "lung"]',
            'c_pre = ["left lung", "right lung"]',
        ]
        for rule in doc["rules"]:
            lines.append("[[rules]]")
            lines.append(f'source = "{rule["source"]}"')
            lines.append(f'kind = "{rule["kind"]}"')
            lines.append("targets = " + json.dumps(rule["targets"]))
            if "subregion_terms" in rule:
                lines.append("subregion_terms = " + json.dumps(rule["subregion_terms"]))
        path = tmp_path / "tiny.toml"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        ontology = load_ontology(path, sizes=None)
        assert resolve("lung", ontology).kind == "one_to_many"
