#!/usr/bin/env python3
"""Build aligned (image region, sentence) pairs under both strategies."""
from radalign import (
    AnatomicalBox,
    BBox,
    ImageDetections,
    Report,
    Triplet,
    build_pairs,
    load_default_ontology,
    merge_boxes,
)
from radalign.pairing import STRATEGY_MERGE, STRATEGY_SPLIT

# --- the box algebra ---------------------------------------------------------
left = BBox(10, 100, 200, 260)
right = BBox(210, 100, 400, 250)
merged = merge_boxes(left, right)
print(f"merge {left.as_tuple()} + {right.as_tuple()} -> {merged.as_tuple()}")
print(f"commutative: {merge_boxes(right, left) == merged}")
print(f"idempotent:  {merge_boxes(left, left) == left}")
print(f"contains both inputs: {merged.contains(left) and merged.contains(right)}\n")

# --- one image-report pair ---------------------------------------------------
ontology = load_default_ontology()
report = Report.from_text(
    "img-1",
    "There is an opacity in the right hilar. "
    "Possible mass near the right ventricle. "
    "The diaphragm unspec is elevated.",
)
triplets = [
    Triplet("right hilar", "opacity", "exist", 0),       # exact mapping
    Triplet("right ventricle", "mass", "exist", 1),      # containment mapping
    Triplet("diaphragm unspec", "opacity", "exist", 2),  # one-to-many mapping
]
detections = ImageDetections(
    "img-1", 1024, 1024,
    (
        AnatomicalBox(BBox(420, 80, 560, 220), "right hilar structures", 0.97),
        AnatomicalBox(BBox(300, 300, 700, 640), "cardiac silhouette", 0.99),
        AnatomicalBox(left, "left diaphragm", 0.91),
        AnatomicalBox(right, "right diaphragm", 0.89),
    ),
)

for strategy in (STRATEGY_MERGE, STRATEGY_SPLIT):
    pairs, diag = build_pairs(report, triplets, detections, ontology, strategy)
    print(f"strategy={strategy}: {len(pairs)} pairs, counts={diag.counts()}")
    for pair in pairs:
        print(f"  {pair.strategy:<14} crop={pair.crop.as_tuple()}  {pair.sentence_text!r}")
    print()

# A triplet whose region has no box is skipped, never fatal.
sparse = ImageDetections("img-1", 1024, 1024,
                         (AnatomicalBox(BBox(300, 300, 700, 640), "cardiac silhouette"),))
pairs, diag = build_pairs(report, triplets, sparse, ontology, STRATEGY_MERGE)
print(f"with most boxes missing: {len(pairs)} pair(s), "
      f"skipped={[(t.region, reason) for t, reason in diag.skipped]}")
