"""Numerical invariant and gradient checks, runnable from the CLI.

The gradient checks compare the tape-computed analytic gradients against
central finite differences, an independent numerical oracle:

    g_k ~= (f(x + step e_k) - f(x - step e_k)) / (2 step)

The relative error uses an infinity-norm numerator over a floored scale,
``max(|analytic|_inf, |numeric|_inf, 0.01)``, so groups with near-zero
gradients compare absolutely (well below finite-difference noise) while
healthy gradients compare relatively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import losses, tag_decoder
from .geometry import BBox, merge_boxes

GRADIENT_TOLERANCE = 1e-4
ROW_SUM_TOLERANCE = 1e-9
IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
        }


def central_difference(
    f: Callable[..., float],
    arrays: Sequence[np.ndarray],
    step: float = 1e-6,
) -> list[np.ndarray]:
    """Central finite-difference gradient of ``f`` w.r.t. each array argument."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for i, arr in enumerate(arrays):
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + step
            f_plus = f(*arrays)
            flat[k] = original - step
            f_minus = f(*arrays)
            flat[k] = original
            grad_flat[k] = (f_plus - f_minus) / (2.0 * step)
        grads.append(grad)
    return grads


def relative_gradient_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-2
) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    scale = max(
        float(np.max(np.abs(analytic))) if analytic.size else 0.0,
        float(np.max(np.abs(numeric))) if numeric.size else 0.0,
        floor,
    )
    return diff / scale


_LOSS_STREAMS = {"image_report": 2, "region_sentence": 3, "soft_label": 5}


def _random_instance(rng: np.random.Generator):
    n = int(rng.integers(2, 9))
    d = int(rng.integers(3, 17))
    hidden = int(rng.integers(2, 9))
    d_out = int(rng.integers(2, min(d, 8) + 1))
    raw_a = rng.standard_normal((n, d))
    raw_b = rng.standard_normal((n, d))
    head_a = losses.ProjectionHead.random(d, hidden, d_out, rng)
    head_b = losses.ProjectionHead.random(d, hidden, d_out, rng)
    tags = (rng.random((n, 6)) < 0.4).astype(np.int64)
    return raw_a, raw_b, head_a, head_b, tags


def _flatten_head_args(head: losses.ProjectionHead) -> list[np.ndarray]:
    return [head.w1, head.b1, head.w2, head.b2]


def _loss_gradient_error(kind: str, rng: np.random.Generator, step: float) -> float:
    raw_a, raw_b, head_a, head_b, tags = _random_instance(rng)
    tau = float(rng.uniform(0.2, 2.0))
    alpha = float(rng.uniform(0.0, 1.0))

    if kind == "image_report":
        value_fn = lambda a, b, ha, hb: losses.image_report_infonce(
            losses.project(a, ha), losses.project(b, hb), tau
        )
        _, analytic = losses.image_report_loss_grads(raw_a, raw_b, head_a, head_b, tau)
    elif kind == "region_sentence":
        value_fn = lambda a, b, ha, hb: losses.region_sentence_infonce(
            losses.project(a, ha), losses.project(b, hb), tau
        )
        _, analytic = losses.region_sentence_loss_grads(raw_a, raw_b, head_a, head_b, tau)
    elif kind == "soft_label":
        value_fn = lambda a, b, ha, hb: losses.soft_label_kl(
            losses.project(a, ha), losses.project(b, hb), tags, tau, alpha
        )
        _, analytic = losses.soft_label_loss_grads(
            raw_a, raw_b, head_a, head_b, tags, tau, alpha
        )
    else:
        raise ValueError(f"unknown loss kind {kind!r}")

    def scalar(a, b, *flat):
        head_a_trial = losses.ProjectionHead(flat[0], flat[1], flat[2], flat[3])
        head_b_trial = losses.ProjectionHead(flat[4], flat[5], flat[6], flat[7])
        return value_fn(a, b, head_a_trial, head_b_trial)

    arrays = [raw_a, raw_b] + _flatten_head_args(head_a) + _flatten_head_args(head_b)
    numeric = central_difference(scalar, arrays, step=step)

    flat_analytic = (
        [analytic["a"], analytic["b"]]
        + [analytic["head_a"][k] for k in ("w1", "b1", "w2", "b2")]
        + [analytic["head_b"][k] for k in ("w1", "b1", "w2", "b2")]
    )
    return max(
        relative_gradient_error(flat_analytic[i], numeric[i]) for i in range(len(arrays))
    )


def run_loss_gradient_checks(
    seed: int = 0, instances: int = 10, step: float = 1e-6
) -> list[CheckResult]:
    """Gradient checks for the three embedding losses (instances each)."""
    results = []
    for kind in ("image_report", "region_sentence", "soft_label"):
        rng = np.random.default_rng([seed, _LOSS_STREAMS[kind]])
        worst = max(_loss_gradient_error(kind, rng, step) for _ in range(instances))
        results.append(
            CheckResult(f"gradients/{kind}", worst <= GRADIENT_TOLERANCE, worst, GRADIENT_TOLERANCE)
        )
    return results


def run_decoder_gradient_check(
    seed: int = 0, instances: int = 100, step: float = 1e-6
) -> CheckResult:
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(instances):
        d = int(rng.integers(2, 9))
        m_z = int(rng.integers(1, 9))
        m_q = int(rng.integers(1, 9))
        tokens = rng.standard_normal((m_z, d))
        queries = rng.standard_normal((m_q, d))
        params = tag_decoder.DecoderParams.random(d, rng)
        labels = (rng.random(m_q) < 0.5).astype(np.float64)
        worst = max(worst, tag_decoder.decoder_grad_check(tokens, queries, params, labels, step))
    return CheckResult("gradients/tag_decoder", worst <= GRADIENT_TOLERANCE, worst, GRADIENT_TOLERANCE)


def run_row_stochastic_check(seed: int = 0, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng([seed, 11])
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 65))
        d = int(rng.integers(2, 129))
        tau = float(rng.uniform(0.01, 10.0))
        a = _unit_rows(rng.standard_normal((n, d)))
        b = _unit_rows(rng.standard_normal((n, d)))
        p = losses.similarity(a, b, tau)
        worst = max(worst, float(np.max(np.abs(p.sum(axis=1) - 1.0))))
        tags = (rng.random((n, 8)) < 0.5).astype(np.int64)
        labels = losses.mix_labels(
            losses.one_hot_labels(n), losses.soft_labels(tags, tau), float(rng.uniform(0, 1))
        )
        worst = max(worst, float(np.max(np.abs(labels.sum(axis=1) - 1.0))))
    return CheckResult("rows/stochastic", worst <= ROW_SUM_TOLERANCE, worst, ROW_SUM_TOLERANCE)


def run_argmax_invariance_check(seed: int = 0, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng([seed, 13])
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(2, 17))
        d = int(rng.integers(2, 33))
        a = _unit_rows(rng.standard_normal((n, d)))
        b = _unit_rows(rng.standard_normal((n, d)))
        argmaxes = {
            tuple(np.argmax(losses.similarity(a, b, tau), axis=1))
            for tau in (0.07, 0.5, 1.0, 5.0)
        }
        if len(argmaxes) != 1:
            failures += 1
    return CheckResult("similarity/argmax_tau_invariant", failures == 0, float(failures), 0.0)


def run_kl_identity_check(seed: int = 0, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng([seed, 17])
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 17))
        d = int(rng.integers(2, 33))
        tau = float(rng.uniform(0.05, 5.0))
        a = _unit_rows(rng.standard_normal((n, d)))
        b = _unit_rows(rng.standard_normal((n, d)))
        p = losses.similarity(a, b, tau)
        worst = max(worst, abs(losses.kl_soft_loss(p, p)))
        hard = losses.one_hot_labels(n)
        kl_hard = losses.kl_soft_loss(hard, p)
        nce = losses.infonce(p)
        worst = max(worst, abs(kl_hard - nce))
        if kl_hard < 0 or nce < 0:
            worst = math.inf
    return CheckResult("kl/identities", worst <= IDENTITY_TOLERANCE, worst, IDENTITY_TOLERANCE)


def run_merge_box_algebra_check(seed: int = 0, trials: int = 10_000) -> CheckResult:
    rng = np.random.default_rng([seed, 19])
    failures = 0
    for _ in range(trials):
        b1, b2, b3 = (_random_box(rng) for _ in range(3))
        merged = merge_boxes(b1, b2)
        if merge_boxes(b2, b1) != merged:
            failures += 1
        if merge_boxes(merge_boxes(b1, b2), b3) != merge_boxes(b1, merge_boxes(b2, b3)):
            failures += 1
        if merge_boxes(b1, b1) != b1:
            failures += 1
        if not (merged.contains(b1) and merged.contains(b2)):
            failures += 1
        if merged.area() < max(b1.area(), b2.area()):
            failures += 1
    return CheckResult("geometry/merge_algebra", failures == 0, float(failures), 0.0)


def run_all(seed: int = 0, gradient_instances: int = 10) -> list[CheckResult]:
    """The full invariant suite, as exposed by the ``check`` CLI command."""
    results = [
        run_row_stochastic_check(seed),
        run_argmax_invariance_check(seed),
        run_kl_identity_check(seed),
        run_merge_box_algebra_check(seed),
    ]
    results.extend(run_loss_gradient_checks(seed, instances=gradient_instances))
    results.append(run_decoder_gradient_check(seed, instances=gradient_instances))
    return results


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _random_box(rng: np.random.Generator) -> BBox:
    x1, y1 = rng.uniform(0, 500, size=2)
    w, h = rng.uniform(1, 500, size=2)
    return BBox(float(x1), float(y1), float(x1 + w), float(y1 + h))
