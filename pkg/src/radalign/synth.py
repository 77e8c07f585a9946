"""Synthetic corpus generation for the end-to-end demo.

All randomness derives from one root seed; every stage gets its own
generator via ``np.random.default_rng([seed, stage])`` so stages stay
independent and the whole corpus is bit-reproducible. Stage numbers:

    0  reports          2  global embeddings     4  decoder inputs
    1  detections       3  pair embeddings       5  projection heads
"""
from __future__ import annotations

import numpy as np

from .ontology import KIND_ONE_TO_MANY, Ontology
from .reports import Lexicon

CANVAS = 1024.0
EMBED_DIM = 16
TOKENS_PER_IMAGE = 6

_TEMPLATES_POSITIVE = (
    "There is a {finding} in the {region}.",
    "Stable {finding} at the {region}.",
    "The {region} shows a small {finding}.",
    "Possible {finding} near the {region}.",
)
_TEMPLATES_NEGATIVE = (
    "No {finding} in the {region}.",
    "No evidence of {finding} at the {region}.",
    "The {region} is without {finding}.",
)
_TEMPLATES_NEUTRAL = (
    "The {region} is clear.",
    "Midline structures are unremarkable.",
)

# Fixed lead report covering exact, containment, and one-to-many mappings,
# plus a finding with no region and no default (a parse diagnostic).
_SHOWCASE_TEXT = (
    "There is an opacity in the right hilar. "
    "Possible mass near the right ventricle. "
    "No effusion at the costophrenic angles. "
    "The diaphragm unspec is elevated. "
    "Probable old fracture."
)


def stage_rng(seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng([seed, stage])


def synth_reports(seed: int, lexicon: Lexicon, ontology: Ontology, count: int = 10) -> list[dict]:
    """Template-built report records, the first one a fixed showcase."""
    rng = stage_rng(seed, 0)
    regions = sorted(ontology.c_ana)
    one_to_many = sorted(
        source for source, rule in ontology.rules.items() if rule.kind == KIND_ONE_TO_MANY
    )
    findings = list(lexicon.classes)

    records = [{"id": "img-000", "text": _SHOWCASE_TEXT}]
    for i in range(1, count):
        n_sentences = int(rng.integers(2, 5))
        sentences = []
        for _ in range(n_sentences):
            # Bias toward one-to-many regions so merge/split paths get traffic.
            pool = one_to_many if rng.random() < 0.35 else regions
            region = pool[int(rng.integers(len(pool)))]
            finding = findings[int(rng.integers(len(findings)))]
            roll = rng.random()
            if roll < 0.45:
                template = _TEMPLATES_POSITIVE[int(rng.integers(len(_TEMPLATES_POSITIVE)))]
            elif roll < 0.8:
                template = _TEMPLATES_NEGATIVE[int(rng.integers(len(_TEMPLATES_NEGATIVE)))]
            else:
                template = _TEMPLATES_NEUTRAL[int(rng.integers(len(_TEMPLATES_NEUTRAL)))]
            sentences.append(template.format(finding=finding, region=region))
        records.append({"id": f"img-{i:03d}", "text": " ".join(sentences)})
    return records


def synth_detections(seed: int, ontology: Ontology, image_ids: list[str]) -> list[dict]:
    """Random boxes for most detector classes on each image.

    Classes are dropped with small probability (exercising box-missing
    skips) and occasionally duplicated with a lower score (exercising
    per-class deduplication).
    """
    rng = stage_rng(seed, 1)
    classes = sorted(ontology.c_pre)
    records = []
    for image_id in image_ids:
        boxes = []
        for cls in classes:
            if rng.random() < 0.12:
                continue
            x1 = float(rng.uniform(0, CANVAS - 220))
            y1 = float(rng.uniform(0, CANVAS - 220))
            w = float(rng.uniform(40, 200))
            h = float(rng.uniform(40, 200))
            score = float(np.round(rng.uniform(0.5, 1.0), 6))
            boxes.append(
                {"cls": cls, "x1": x1, "y1": y1, "x2": x1 + w, "y2": y1 + h, "score": score}
            )
            if rng.random() < 0.08:
                boxes.append(
                    {
                        "cls": cls,
                        "x1": x1 + 5.0,
                        "y1": y1 + 5.0,
                        "x2": x1 + w,
                        "y2": y1 + h,
                        "score": max(0.0, score - 0.2),
                    }
                )
        records.append(
            {"image_id": image_id, "width": CANVAS, "height": CANVAS, "boxes": boxes}
        )
    return records


def synth_global_embeddings(seed: int, count: int, dim: int = EMBED_DIM):
    rng = stage_rng(seed, 2)
    return rng.standard_normal((count, dim)), rng.standard_normal((count, dim))


def synth_pair_embeddings(seed: int, count: int, dim: int = EMBED_DIM):
    rng = stage_rng(seed, 3)
    return rng.standard_normal((count, dim)), rng.standard_normal((count, dim))


def synth_decoder_inputs(seed: int, image_ids: list[str], n_classes: int, dim: int = EMBED_DIM):
    """Visual token stacks per image, query matrix, and decoder parameters."""
    from .tag_decoder import DecoderParams

    rng = stage_rng(seed, 4)
    tokens = [
        {"image_id": image_id, "tokens": rng.standard_normal((TOKENS_PER_IMAGE, dim)).tolist()}
        for image_id in image_ids
    ]
    queries = rng.standard_normal((n_classes, dim))
    params = DecoderParams.random(dim, rng)
    return tokens, queries, params
