#!/usr/bin/env python3
"""Synthetic end-to-end run: parse -> align -> loss-eval, twice, bit-identical.

Equivalent to ``radalign demo --seed 0`` but driven through the library.
"""
import tempfile
from pathlib import Path

from radalign.config import RunConfig
from radalign.fileio import sha256_file
from radalign.pipeline import run_demo

config = RunConfig(seed=0).validate()

with tempfile.TemporaryDirectory() as tmp:
    first = Path(tmp) / "first"
    second = Path(tmp) / "second"
    report = run_demo(config, first)
    again = run_demo(config, second)

    print(f"reports: {report['reports']}, triplets: {report['triplets']}")
    print(f"pair counts: {report['pair_counts']}")
    print("losses:")
    for name, value in report["losses"].items():
        print(f"  {name:>20}: {value:.6f}")
    print(f"parse diagnostics: {report['parse_diagnostics']}")

    names = sorted(p.name for p in first.iterdir())
    identical = all(
        sha256_file(first / name) == sha256_file(second / name) for name in names
    )
    print(f"\n{len(names)} output files; second run byte-identical: {identical}")
    print(f"report hash match: {report['output_hashes'] == again['output_hashes']}")
