#!/usr/bin/env python3
"""Walk through report parsing: sentences, triplets, and tag vectors."""
import numpy as np

from radalign import Report, load_default_lexicon, parse_report, split_sentences

lexicon = load_default_lexicon()
print(f"lexicon: {len(lexicon.classes)} disease classes, "
      f"{len(lexicon.region_terms)} region surfaces, "
      f"{len(lexicon.finding_terms)} finding surfaces\n")

# --- sentence splitting ------------------------------------------------------
text = "No pneumothorax. Heart size is normal. A 3.5 cm nodule in the right upper lobe."
print(f"report text: {text!r}")
for sentence in split_sentences(text):
    print(f"  [{sentence.start:2d},{sentence.end:2d})  {sentence.text!r}")
print("note the decimal point in '3.5' does not split the last sentence\n")

# --- triplet extraction ------------------------------------------------------
samples = [
    "There is a pneumothorax in the lung.",
    "No pneumothorax in the lung.",
    "Possible pneumonia in the left lower lobe.",     # hedges count as present
    "No evidence of effusion at the costophrenic angles.",
    "Patient is comfortable.",                        # nothing to extract
]
for sample in samples:
    report = Report.from_text("demo", sample)
    parsed = parse_report(report, lexicon)
    triplets = [(t.region, t.finding, t.existence) for t in parsed.triplets]
    print(f"{sample}\n  -> {triplets or 'no triplets'}")

# --- tag vectors -------------------------------------------------------------
report = Report.from_text(
    "demo",
    "There is a pleural effusion at the left costophrenic angle. "
    "No pneumothorax in the lung. Scarring in the right upper lobe.",
)
parsed = parse_report(report, lexicon)
bits = parsed.tags
print("\ntag vector (1 = finding present somewhere in the report):")
for cls, bit in zip(lexicon.classes, bits):
    if bit:
        print(f"  {cls}: 1")
print(f"  (all remaining {int(len(bits) - np.sum(bits))} classes: 0)")
print("the negated pneumothorax contributes 0, the absent finding rule")
