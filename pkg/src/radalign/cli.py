"""Command-line interface.

Exit codes: 0 success, 1 input/validation failure, 2 invariant-check
failure. Failures emit one machine-readable JSON record on stderr:
``{"error": <kind>, "message": <text>}``.
"""
from __future__ import annotations

import functools
import json
import sys

import click

from . import checks, pipeline
from .config import ConfigError, build_config
from .ontology import load_default_ontology, load_ontology
from .pairing import STRATEGY_MERGE, STRATEGY_SPLIT

_STRATEGY_FLAGS = {"merge": STRATEGY_MERGE, "split": STRATEGY_SPLIT}


def _fail(kind: str, message: str, code: int = 1):
    click.echo(json.dumps({"error": kind, "message": message}), err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            _fail("FileNotFound", str(exc))
        except (ConfigError, ValueError) as exc:
            _fail(type(exc).__name__, str(exc))

    return wrapper


def _config_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="TOML config file."),
        click.option("--tau", type=float, default=None, help="Softmax temperature (> 0)."),
        click.option("--alpha", type=float, default=None, help="Soft-label mixing weight in [0, 1]."),
        click.option("--strategy", type=click.Choice(sorted(_STRATEGY_FLAGS)), default=None,
                     help="One-to-many resolution strategy."),
        click.option("--seed", type=int, default=None, help="Root random seed."),
        click.option("--loss-weights", type=str, default=None,
                     help="Four comma-separated non-negative weights."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _make_config(config_path, tau, alpha, strategy, seed, loss_weights):
    return build_config(
        config_path=config_path,
        tau=tau,
        alpha=alpha,
        strategy=_STRATEGY_FLAGS[strategy] if strategy else None,
        seed=seed,
        loss_weights=loss_weights,
    )


def _emit(report: dict) -> None:
    click.echo(json.dumps(report, indent=2, sort_keys=True))


def _resolve_path(flag_value, config, key: str, required: bool = False):
    """A path flag falls back to the config file's [paths] table."""
    value = flag_value if flag_value is not None else config.paths.get(key)
    if required and value is None:
        _fail("MissingInput", f"missing --{key.replace('_', '-')} (no paths.{key} in config)")
    return value


@click.group()
def main():
    """Report parsing, region-sentence alignment, and loss evaluation."""


@main.command()
@click.option("--reports", "reports_path", type=click.Path(), default=None,
              help="Reports JSONL ({id, text}).")
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None,
              help="Lexicon JSON/TOML (default: shipped).")
@click.option("--ontology", "ontology_path", type=click.Path(), default=None,
              help="Ontology JSON/TOML (default: shipped).")
@click.option("--triplets-out", type=click.Path(), default="triplets.jsonl", show_default=True)
@click.option("--tags-out", type=click.Path(), default="tags.jsonl", show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file (paths fall back to its [paths] table).")
@_guarded
def parse(reports_path, lexicon_path, ontology_path, triplets_out, tags_out, config_path):
    """Parse reports into triplets and per-report tag vectors."""
    config = build_config(config_path=config_path)
    summary = pipeline.run_parse(
        _resolve_path(reports_path, config, "reports", required=True),
        _resolve_path(lexicon_path, config, "lexicon"),
        _resolve_path(ontology_path, config, "ontology"),
        triplets_out,
        tags_out,
    )
    _emit({"command": "parse", **summary})


@main.command()
@click.option("--triplets", "triplets_path", type=click.Path(), default=None)
@click.option("--reports", "reports_path", type=click.Path(), default=None,
              help="Reports JSONL (for sentence text).")
@click.option("--detections", "detections_path", type=click.Path(), default=None)
@click.option("--ontology", "ontology_path", type=click.Path(), default=None)
@click.option("--strategy", type=click.Choice(sorted(_STRATEGY_FLAGS)), default=None,
              help="One-to-many resolution strategy (default from config: merge).")
@click.option("--pairs-out", type=click.Path(), default="pairs.jsonl", show_default=True)
@click.option("--diagnostics-out", type=click.Path(), default="diagnostics.jsonl",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file (paths fall back to its [paths] table).")
@_guarded
def align(triplets_path, reports_path, detections_path, ontology_path, strategy,
          pairs_out, diagnostics_out, config_path):
    """Build aligned region-sentence pairs from triplets and detections."""
    config = build_config(
        config_path=config_path,
        strategy=_STRATEGY_FLAGS[strategy] if strategy else None,
    )
    summary = pipeline.run_align(
        _resolve_path(triplets_path, config, "triplets", required=True),
        _resolve_path(reports_path, config, "reports", required=True),
        _resolve_path(detections_path, config, "detections", required=True),
        _resolve_path(ontology_path, config, "ontology"),
        config.strategy, pairs_out, diagnostics_out,
    )
    _emit({"command": "align", **summary})


@main.command("loss-eval")
@click.option("--image-embeddings", type=click.Path(), default=None)
@click.option("--text-embeddings", type=click.Path(), default=None)
@click.option("--tags", "tags_path", type=click.Path(), default=None)
@click.option("--pairs", "pairs_path", type=click.Path(), default=None)
@click.option("--region-embeddings", type=click.Path(), default=None)
@click.option("--sentence-embeddings", type=click.Path(), default=None)
@click.option("--visual-tokens", type=click.Path(), default=None)
@click.option("--queries", "queries_path", type=click.Path(), default=None)
@click.option("--decoder-params", type=click.Path(), default=None)
@click.option("--losses-out", type=click.Path(), default="losses.json", show_default=True)
@_config_options
@_guarded
def loss_eval(image_embeddings, text_embeddings, tags_path, pairs_path,
              region_embeddings, sentence_embeddings, visual_tokens, queries_path,
              decoder_params, losses_out, config_path, tau, alpha, strategy, seed,
              loss_weights):
    """Evaluate the four loss components on embedding and tag files."""
    config = _make_config(config_path, tau, alpha, strategy, seed, loss_weights)
    summary = pipeline.run_loss_eval(
        config,
        _resolve_path(image_embeddings, config, "image_embeddings", required=True),
        _resolve_path(text_embeddings, config, "text_embeddings", required=True),
        _resolve_path(tags_path, config, "tags", required=True),
        _resolve_path(pairs_path, config, "pairs"),
        _resolve_path(region_embeddings, config, "region_embeddings"),
        _resolve_path(sentence_embeddings, config, "sentence_embeddings"),
        _resolve_path(visual_tokens, config, "visual_tokens"),
        _resolve_path(queries_path, config, "queries"),
        _resolve_path(decoder_params, config, "decoder_params"),
        losses_out,
    )
    _emit({"command": "loss-eval", "config": config.as_dict(), **summary})


@main.command()
@click.option("--gradient-instances", type=int, default=10, show_default=True,
              help="Random instances per gradient check.")
@_config_options
@_guarded
def check(gradient_instances, config_path, tau, alpha, strategy, seed, loss_weights):
    """Run the numerical invariant suite; exit 2 if any check fails."""
    config = _make_config(config_path, tau, alpha, strategy, seed, loss_weights)
    results = checks.run_all(config.seed, gradient_instances=gradient_instances)
    report = {
        "command": "check",
        "config": config.as_dict(),
        "checks": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
    }
    _emit(report)
    if not report["passed"]:
        sys.exit(2)


@main.command()
@click.option("--outdir", type=click.Path(), default="demo_out", show_default=True)
@_config_options
@_guarded
def demo(outdir, config_path, tau, alpha, strategy, seed, loss_weights):
    """Generate a synthetic corpus and run parse, align, and loss-eval."""
    config = _make_config(config_path, tau, alpha, strategy, seed, loss_weights)
    _emit(pipeline.run_demo(config, outdir))


@main.command("validate-ontology")
@click.option("--ontology", "ontology_path", type=click.Path(), default=None,
              help="Ontology file to validate (default: shipped).")
@_guarded
def validate_ontology_cmd(ontology_path):
    """Validate an ontology table against the structural invariants."""
    ontology = load_default_ontology() if ontology_path is None else load_ontology(ontology_path)
    _emit(
        {
            "command": "validate-ontology",
            "valid": True,
            "anatomical_terms": len(ontology.c_ana),
            "detector_classes": len(ontology.c_pre),
            "rules": len(ontology.rules),
        }
    )


if __name__ == "__main__":
    main()
