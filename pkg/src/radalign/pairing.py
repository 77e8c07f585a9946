"""Build aligned (image region, report sentence) pairs from one image-report pair.

Each triplet's region term is resolved against the ontology: exact and
containment mappings pair the sentence directly with that class's box;
one-to-many mappings are handled by the configured strategy, either merging
all target boxes into one crop or splitting the sentence into one variant
per target. Failures never raise; they are recorded as diagnostics.
"""
from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field

from .geometry import BBox, ImageDetections, merge_boxes
from .ontology import KIND_ONE_TO_MANY, Ontology, resolve
from .reports import Report, Triplet

STRATEGY_MERGE = "merge"
STRATEGY_SPLIT = "split"
STRATEGIES = (STRATEGY_MERGE, STRATEGY_SPLIT)

PAIR_DIRECT = "direct"
PAIR_MERGED = "merged_boxes"
PAIR_SPLIT = "split_sentence"

SKIP_UNMAPPED = "unmapped"
SKIP_BOX_MISSING = "box_missing"


class TermNotFound(ValueError):
    """The region term does not occur in the sentence to be split."""


@dataclass(frozen=True)
class RegionSentencePair:
    """One aligned (image crop, sentence text) training unit."""

    image_id: str
    crop: BBox
    classes: tuple[str, ...]
    sentence_text: str
    triplet_ref: tuple[int, str]  # (sentence index, region term)
    strategy: str

    def as_record(self) -> dict:
        return {
            "image_id": self.image_id,
            "crop": list(self.crop.as_tuple()),
            "classes": list(self.classes),
            "sentence": self.sentence_text,
            "strategy": self.strategy,
        }


@dataclass
class PairingDiagnostics:
    """Per-triplet accounting for one build_pairs run.

    A triplet counts as emitted when it produced at least one pair before
    deduplication, so ``emitted + skipped == total`` always holds.
    """

    total: int = 0
    emitted: int = 0
    skipped: list[tuple[Triplet, str]] = field(default_factory=list)
    fallbacks: list[Triplet] = field(default_factory=list)
    pair_counts: dict[str, int] = field(
        default_factory=lambda: {PAIR_DIRECT: 0, PAIR_MERGED: 0, PAIR_SPLIT: 0}
    )
    deduplicated: int = 0

    def counts(self) -> dict[str, int]:
        return {**self.pair_counts, "skipped": len(self.skipped)}

    def skip_records(self, image_id: str) -> list[dict]:
        records = [
            {
                "image_id": image_id,
                "sentence_index": triplet.source_sentence,
                "region": triplet.region,
                "finding": triplet.finding,
                "reason": reason,
            }
            for triplet, reason in self.skipped
        ]
        records.extend(
            {
                "image_id": image_id,
                "sentence_index": triplet.source_sentence,
                "region": triplet.region,
                "finding": triplet.finding,
                "reason": "term_not_found_fallback_merge",
            }
            for triplet in self.fallbacks
        )
        return records


def split_sentence(
    sentence_text: str,
    region_term: str,
    subregion_terms: tuple[str, ...] | list[str],
) -> list[str]:
    """One sentence variant per subregion term.

    The first case-insensitive whole-word occurrence of ``region_term`` is
    replaced by each subregion term in turn; the rest of the sentence is
    untouched. Raises TermNotFound when the region term does not occur.
    """
    if len(subregion_terms) < 2:
        raise ValueError("need at least two subregion terms to split")
    pattern = r"\b" + re.escape(region_term) + r"\b"
    match = re.search(pattern, sentence_text, flags=re.IGNORECASE)
    if match is None:
        raise TermNotFound(f"region term {region_term!r} not found in {sentence_text!r}")
    head, tail = sentence_text[: match.start()], sentence_text[match.end() :]
    return [head + sub + tail for sub in subregion_terms]


def build_pairs(
    report: Report,
    triplets: Sequence[Triplet],
    detections: ImageDetections,
    ontology: Ontology,
    strategy: str = STRATEGY_MERGE,
) -> tuple[list[RegionSentencePair], PairingDiagnostics]:
    """Construct region-sentence pairs for one (image, report) pair.

    Output order follows triplet order; exact duplicate (crop, sentence)
    pairs are dropped keeping the first. Triplets whose region is unmapped
    or whose required boxes are missing are skipped with a diagnostic.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    diagnostics = PairingDiagnostics(total=len(triplets))
    pairs: list[RegionSentencePair] = []
    seen: set[tuple[tuple[float, float, float, float], str]] = set()

    def emit(pair: RegionSentencePair) -> bool:
        key = (pair.crop.as_tuple(), pair.sentence_text)
        if key in seen:
            diagnostics.deduplicated += 1
            return False
        seen.add(key)
        diagnostics.pair_counts[pair.strategy] += 1
        pairs.append(pair)
        return True

    for triplet in triplets:
        if not (0 <= triplet.source_sentence < len(report.sentences)):
            raise ValueError(
                f"triplet references sentence {triplet.source_sentence}, "
                f"but report {report.id!r} has {len(report.sentences)} sentences"
            )
        sentence = report.sentences[triplet.source_sentence]
        resolution = resolve(triplet.region, ontology)
        if not resolution.mapped:
            diagnostics.skipped.append((triplet, SKIP_UNMAPPED))
            continue

        boxes = [detections.box_for(cls) for cls in resolution.targets]
        if any(box is None for box in boxes):
            diagnostics.skipped.append((triplet, SKIP_BOX_MISSING))
            continue

        ref = (triplet.source_sentence, triplet.region)
        if resolution.kind != KIND_ONE_TO_MANY:
            emit(
                RegionSentencePair(
                    image_id=detections.image_id,
                    crop=boxes[0].bbox,
                    classes=resolution.targets,
                    sentence_text=sentence.text,
                    triplet_ref=ref,
                    strategy=PAIR_DIRECT,
                )
            )
            diagnostics.emitted += 1
            continue

        use_merge = strategy == STRATEGY_MERGE
        if not use_merge:
            try:
                variants = split_sentence(
                    sentence.text, triplet.region, resolution.subregion_terms
                )
            except TermNotFound:
                diagnostics.fallbacks.append(triplet)
                use_merge = True

        if use_merge:
            crop = boxes[0].bbox
            for box in boxes[1:]:
                crop = merge_boxes(crop, box.bbox)
            emit(
                RegionSentencePair(
                    image_id=detections.image_id,
                    crop=crop,
                    classes=resolution.targets,
                    sentence_text=sentence.text,
                    triplet_ref=ref,
                    strategy=PAIR_MERGED,
                )
            )
        else:
            for variant, target, box in zip(variants, resolution.targets, boxes):
                emit(
                    RegionSentencePair(
                        image_id=detections.image_id,
                        crop=box.bbox,
                        classes=(target,),
                        sentence_text=variant,
                        triplet_ref=ref,
                        strategy=PAIR_SPLIT,
                    )
                )
        diagnostics.emitted += 1

    return pairs, diagnostics
