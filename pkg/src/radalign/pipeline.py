"""End-to-end command implementations shared by the CLI.

Reports and detections are joined on their id (a report with id X pairs
with the detection record whose image_id is X); a report without
detections keeps all its triplets, each skipped with a box-missing
diagnostic. All outputs are deterministic functions of the input bytes
and the run configuration.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from . import fileio, losses, synth, tag_decoder
from .config import RunConfig
from .geometry import ImageDetections, ingest_detections
from .ontology import (
    Ontology,
    load_default_ontology,
    load_ontology,
    serialize_ontology,
)
from .pairing import build_pairs
from .reports import (
    ABSENT,
    EXIST,
    Lexicon,
    Report,
    Triplet,
    load_default_lexicon,
    load_lexicon,
    parse_report,
    tags_from_triplets,
    validate_lexicon,
)


class InputError(ValueError):
    """Invalid or inconsistent input data (CLI exit code 1)."""


def _load_ontology_arg(path: str | None) -> Ontology:
    return load_default_ontology() if path is None else load_ontology(path)


def _load_lexicon_arg(path: str | None) -> Lexicon:
    return load_default_lexicon() if path is None else load_lexicon(path)


def _read_reports(path: str | Path) -> list[Report]:
    reports = []
    for record in fileio.iter_jsonl(path):
        try:
            reports.append(Report.from_text(str(record["id"]), str(record["text"])))
        except KeyError as exc:
            raise InputError(f"{path}: report record missing field {exc}") from exc
    return reports


def run_parse(
    reports_path: str,
    lexicon_path: str | None,
    ontology_path: str | None,
    triplets_out: str,
    tags_out: str,
) -> dict:
    """Parse reports into triplet and tag-vector files; returns a summary."""
    lexicon = _load_lexicon_arg(lexicon_path)
    ontology = _load_ontology_arg(ontology_path)
    validate_lexicon(lexicon, ontology)
    reports = _read_reports(reports_path)

    triplet_records: list[dict] = []
    tag_records: list[dict] = []
    diagnostics: list[dict] = []
    sentence_count = 0
    for report in reports:
        parsed = parse_report(report, lexicon)
        sentence_count += len(report.sentences)
        triplet_records.extend(t.as_record(report.id) for t in parsed.triplets)
        tag_records.append({"id": report.id, "bits": parsed.tags.tolist()})
        diagnostics.extend({"id": report.id, **d} for d in parsed.diagnostics)

    fileio.write_jsonl(triplets_out, triplet_records)
    fileio.write_jsonl(tags_out, tag_records)
    return {
        "reports": len(reports),
        "sentences": sentence_count,
        "triplets": len(triplet_records),
        "diagnostics": diagnostics,
        "output_hashes": {
            Path(triplets_out).name: fileio.sha256_file(triplets_out),
            Path(tags_out).name: fileio.sha256_file(tags_out),
        },
    }


def _read_triplets(path: str | Path) -> dict[str, list[Triplet]]:
    by_report: dict[str, list[Triplet]] = {}
    for record in fileio.iter_jsonl(path):
        try:
            existence = str(record["existence"])
            if existence not in (EXIST, ABSENT):
                raise InputError(f"{path}: bad existence value {existence!r}")
            triplet = Triplet(
                region=str(record["region"]),
                finding=str(record["finding"]),
                existence=existence,
                source_sentence=int(record["sentence_index"]),
            )
            by_report.setdefault(str(record["id"]), []).append(triplet)
        except KeyError as exc:
            raise InputError(f"{path}: triplet record missing field {exc}") from exc
    return by_report


def run_align(
    triplets_path: str,
    reports_path: str,
    detections_path: str,
    ontology_path: str | None,
    strategy: str,
    pairs_out: str,
    diagnostics_out: str,
) -> dict:
    """Build region-sentence pairs; returns a summary with per-strategy counts."""
    ontology = _load_ontology_arg(ontology_path)
    reports = _read_reports(reports_path)
    report_ids = {r.id for r in reports}
    triplets_by_report = _read_triplets(triplets_path)
    unknown = sorted(set(triplets_by_report) - report_ids)
    if unknown:
        raise InputError(f"triplets reference unknown report ids: {unknown[:5]}")

    with open(detections_path, "r", encoding="utf-8") as fh:
        detections = {d.image_id: d for d in ingest_detections(fh, ontology.c_pre)}

    pair_records: list[dict] = []
    diag_records: list[dict] = []
    counts = {"direct": 0, "merged_boxes": 0, "split_sentence": 0, "skipped": 0}
    deduplicated = 0
    for report in reports:
        triplets = triplets_by_report.get(report.id, [])
        if not triplets:
            continue
        image = detections.get(
            report.id, ImageDetections(image_id=report.id, width=1.0, height=1.0)
        )
        pairs, diag = build_pairs(report, triplets, image, ontology, strategy)
        pair_records.extend(p.as_record() for p in pairs)
        diag_records.extend(diag.skip_records(report.id))
        for key, value in diag.counts().items():
            counts[key] += value
        deduplicated += diag.deduplicated

    fileio.write_jsonl(pairs_out, pair_records)
    fileio.write_jsonl(diagnostics_out, diag_records)
    return {
        "pairs": len(pair_records),
        "pair_counts": counts,
        "deduplicated": deduplicated,
        "output_hashes": {
            Path(pairs_out).name: fileio.sha256_file(pairs_out),
            Path(diagnostics_out).name: fileio.sha256_file(diagnostics_out),
        },
    }


def _seeded_head(seed: int, stream: int, d: int) -> losses.ProjectionHead:
    rng = synth.stage_rng(seed, stream)
    return losses.ProjectionHead.random(d, d, d, rng)


def evaluate_losses(
    config: RunConfig,
    image_embeddings: np.ndarray,
    text_embeddings: np.ndarray,
    tags: np.ndarray,
    region_embeddings: np.ndarray | None,
    sentence_embeddings: np.ndarray | None,
    token_batches: list[np.ndarray] | None,
    queries: np.ndarray | None,
    decoder_params: tag_decoder.DecoderParams | None,
) -> tuple[losses.LossBreakdown, dict]:
    """Compute the four weighted loss components for one batch.

    Projection heads are drawn deterministically from the run seed
    (streams 5-8). Missing pair embeddings or decoder inputs zero the
    corresponding component with an explanatory note.
    """
    notes: list[str] = []
    if image_embeddings.shape != text_embeddings.shape:
        raise InputError(
            f"image embeddings {image_embeddings.shape} and text embeddings "
            f"{text_embeddings.shape} must match"
        )
    n, d = image_embeddings.shape
    if tags.shape[0] != n:
        raise InputError(f"{tags.shape[0]} tag vectors for {n} embeddings")

    image_hat = losses.project(image_embeddings, _seeded_head(config.seed, 5, d))
    text_hat = losses.project(text_embeddings, _seeded_head(config.seed, 6, d))
    p_it = losses.similarity(image_hat, text_hat, config.tau)
    p_ti = losses.similarity(text_hat, image_hat, config.tau)
    image_report = 0.5 * (losses.infonce(p_it) + losses.infonce(p_ti))

    max_row_error = max(
        float(np.max(np.abs(p_it.sum(axis=1) - 1.0))),
        float(np.max(np.abs(p_ti.sum(axis=1) - 1.0))),
    )

    if region_embeddings is None or sentence_embeddings is None or region_embeddings.size == 0:
        notes.append("no region-sentence pairs: region_sentence_nce set to 0")
        region_sentence = 0.0
    else:
        d_pair = region_embeddings.shape[1]
        region_hat = losses.project(region_embeddings, _seeded_head(config.seed, 7, d_pair))
        sentence_hat = losses.project(sentence_embeddings, _seeded_head(config.seed, 8, d_pair))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            region_sentence = losses.region_sentence_infonce(region_hat, sentence_hat, config.tau)

    p_hat = losses.mix_labels(
        losses.one_hot_labels(n), losses.soft_labels(tags, config.tau), config.alpha
    )
    soft = 0.5 * (losses.kl_soft_loss(p_hat, p_it) + losses.kl_soft_loss(p_hat, p_ti))

    if token_batches is None or queries is None or decoder_params is None:
        notes.append("no decoder inputs: tag_bce set to 0")
        bce = 0.0
    else:
        bce = tag_decoder.batch_bce_loss(token_batches, queries, decoder_params, tags)

    w = config.loss_weights
    breakdown = losses.total_loss(
        w[0] * image_report, w[1] * region_sentence, w[2] * bce, w[3] * soft
    )
    return breakdown, {"notes": notes, "max_row_sum_error": max_row_error}


def _read_tags(path: str | Path) -> np.ndarray:
    rows = []
    for record in fileio.iter_jsonl(path):
        try:
            rows.append(record["bits"])
        except KeyError as exc:
            raise InputError(f"{path}: tag record missing field {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no tag vectors")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise InputError(f"{path}: inconsistent tag vector lengths {sorted(lengths)}")
    return np.asarray(rows, dtype=np.int64)


def _read_token_batches(path: str | Path) -> list[np.ndarray]:
    return [
        np.asarray(record["tokens"], dtype=np.float64) for record in fileio.iter_jsonl(path)
    ]


def run_loss_eval(
    config: RunConfig,
    image_embeddings_path: str,
    text_embeddings_path: str,
    tags_path: str,
    pairs_path: str | None,
    region_embeddings_path: str | None,
    sentence_embeddings_path: str | None,
    visual_tokens_path: str | None,
    queries_path: str | None,
    decoder_params_path: str | None,
    losses_out: str,
) -> dict:
    image_embeddings = fileio.read_embeddings(image_embeddings_path)
    text_embeddings = fileio.read_embeddings(text_embeddings_path)
    tags = _read_tags(tags_path)

    region_embeddings = sentence_embeddings = None
    pair_inputs = (region_embeddings_path, sentence_embeddings_path)
    if any(pair_inputs) and not all(pair_inputs):
        raise InputError("region and sentence embeddings must be supplied together")
    if all(pair_inputs):
        region_embeddings = fileio.read_embeddings(region_embeddings_path)
        sentence_embeddings = fileio.read_embeddings(sentence_embeddings_path)
        if pairs_path is not None:
            n_pairs = len(fileio.read_jsonl(pairs_path))
            if region_embeddings.shape[0] != n_pairs:
                raise InputError(
                    f"{region_embeddings.shape[0]} region embeddings for {n_pairs} pairs"
                )

    token_batches = queries = params = None
    decoder_inputs = (visual_tokens_path, queries_path, decoder_params_path)
    if any(decoder_inputs) and not all(decoder_inputs):
        raise InputError(
            "visual tokens, queries, and decoder params must be supplied together"
        )
    if all(decoder_inputs):
        token_batches = _read_token_batches(visual_tokens_path)
        queries = fileio.read_matrix(queries_path)
        params = tag_decoder.DecoderParams.load(decoder_params_path)
        if queries.shape[0] != tags.shape[1]:
            raise InputError(
                f"{queries.shape[0]} query rows but {tags.shape[1]} disease classes"
            )
        if len(token_batches) != tags.shape[0]:
            raise InputError(
                f"{len(token_batches)} visual token records for {tags.shape[0]} reports"
            )

    breakdown, diagnostics = evaluate_losses(
        config,
        image_embeddings,
        text_embeddings,
        tags,
        region_embeddings,
        sentence_embeddings,
        token_batches,
        queries,
        params,
    )
    fileio.write_json(losses_out, breakdown.as_dict())
    return {
        "losses": breakdown.as_dict(),
        "diagnostics": diagnostics,
        "output_hashes": {Path(losses_out).name: fileio.sha256_file(losses_out)},
    }


def run_demo(config: RunConfig, outdir: str | Path) -> dict:
    """Generate a synthetic corpus and run parse -> align -> loss-eval.

    Every file under ``outdir`` is a deterministic function of the seed, so
    two runs with the same configuration produce byte-identical trees.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = config.seed
    lexicon = load_default_lexicon()
    ontology = load_default_ontology()

    (outdir / "ontology.json").write_text(serialize_ontology(ontology), encoding="utf-8")
    report_records = synth.synth_reports(seed, lexicon, ontology)
    fileio.write_jsonl(outdir / "reports.jsonl", report_records)
    image_ids = [r["id"] for r in report_records]
    fileio.write_jsonl(
        outdir / "detections.jsonl", synth.synth_detections(seed, ontology, image_ids)
    )

    parse_summary = run_parse(
        str(outdir / "reports.jsonl"),
        None,
        None,
        str(outdir / "triplets.jsonl"),
        str(outdir / "tags.jsonl"),
    )
    align_summary = run_align(
        str(outdir / "triplets.jsonl"),
        str(outdir / "reports.jsonl"),
        str(outdir / "detections.jsonl"),
        None,
        config.strategy,
        str(outdir / "pairs.jsonl"),
        str(outdir / "diagnostics.jsonl"),
    )

    n_reports = len(report_records)
    image_embeddings, text_embeddings = synth.synth_global_embeddings(seed, n_reports)
    fileio.write_matrix(outdir / "image_embeddings.bin", image_embeddings)
    fileio.write_matrix(outdir / "text_embeddings.bin", text_embeddings)

    n_pairs = align_summary["pairs"]
    region_embeddings, sentence_embeddings = synth.synth_pair_embeddings(seed, n_pairs)
    fileio.write_matrix(outdir / "region_embeddings.bin", region_embeddings)
    fileio.write_matrix(outdir / "sentence_embeddings.bin", sentence_embeddings)

    token_records, queries, params = synth.synth_decoder_inputs(
        seed, image_ids, len(lexicon.classes)
    )
    fileio.write_jsonl(outdir / "visual_tokens.jsonl", token_records)
    fileio.write_matrix(outdir / "queries.bin", queries)
    params.save(outdir / "decoder_params.json")

    loss_summary = run_loss_eval(
        config,
        str(outdir / "image_embeddings.bin"),
        str(outdir / "text_embeddings.bin"),
        str(outdir / "tags.jsonl"),
        str(outdir / "pairs.jsonl"),
        str(outdir / "region_embeddings.bin"),
        str(outdir / "sentence_embeddings.bin"),
        str(outdir / "visual_tokens.jsonl"),
        str(outdir / "queries.bin"),
        str(outdir / "decoder_params.json"),
        str(outdir / "losses.json"),
    )

    output_hashes = {
        name: fileio.sha256_file(outdir / name)
        for name in sorted(p.name for p in outdir.iterdir() if p.name != "report.json")
    }
    report = {
        "command": "demo",
        "config": config.as_dict(),
        "reports": parse_summary["reports"],
        "triplets": parse_summary["triplets"],
        "parse_diagnostics": parse_summary["diagnostics"],
        "pair_counts": align_summary["pair_counts"],
        "deduplicated": align_summary["deduplicated"],
        "losses": loss_summary["losses"],
        "loss_diagnostics": loss_summary["diagnostics"],
        "checks": None,
        "output_hashes": output_hashes,
    }
    fileio.write_json(outdir / "report.json", report)
    return report
