"""radalign: chest X-ray report parsing, region-sentence alignment, and loss kernels.

The library decomposes radiology reports into ``(region, finding,
existence)`` triplets, resolves report-side anatomy terms onto detector
region classes, builds aligned region-sentence training pairs, and
evaluates the contrastive / distillation objective stack in float64.
"""
from .geometry import AnatomicalBox, BBox, ImageDetections, ingest_detections, merge_boxes
from .losses import (
    LossBreakdown,
    ProjectionHead,
    image_report_infonce,
    infonce,
    kl_soft_loss,
    mix_labels,
    one_hot_labels,
    project,
    region_sentence_infonce,
    similarity,
    soft_label_kl,
    soft_labels,
    total_loss,
)
from .ontology import (
    MappingResolution,
    MappingRule,
    Ontology,
    load_default_ontology,
    load_ontology,
    resolve,
    serialize_ontology,
    validate_ontology,
)
from .pairing import PairingDiagnostics, RegionSentencePair, build_pairs, split_sentence
from .reports import (
    Lexicon,
    ParsedReport,
    Report,
    Sentence,
    Triplet,
    extract_triplets,
    load_default_lexicon,
    load_lexicon,
    parse_report,
    split_sentences,
    tags_from_triplets,
)
from .tag_decoder import DecoderParams, batch_bce_loss, bce_loss, decode_tags, decoder_grad_check

__version__ = "0.1.0"

__all__ = [
    "AnatomicalBox",
    "BBox",
    "DecoderParams",
    "ImageDetections",
    "Lexicon",
    "LossBreakdown",
    "MappingResolution",
    "MappingRule",
    "Ontology",
    "PairingDiagnostics",
    "ParsedReport",
    "ProjectionHead",
    "RegionSentencePair",
    "Report",
    "Sentence",
    "Triplet",
    "batch_bce_loss",
    "bce_loss",
    "build_pairs",
    "decode_tags",
    "decoder_grad_check",
    "extract_triplets",
    "image_report_infonce",
    "infonce",
    "ingest_detections",
    "kl_soft_loss",
    "load_default_lexicon",
    "load_default_ontology",
    "load_lexicon",
    "load_ontology",
    "merge_boxes",
    "mix_labels",
    "one_hot_labels",
    "parse_report",
    "project",
    "region_sentence_infonce",
    "resolve",
    "serialize_ontology",
    "similarity",
    "soft_label_kl",
    "soft_labels",
    "split_sentence",
    "split_sentences",
    "tags_from_triplets",
    "total_loss",
    "validate_ontology",
]
