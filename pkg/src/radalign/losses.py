"""Contrastive and distillation loss kernel in 64-bit floating point.

Embedding batches are plain (N, d) float64 arrays. The pipeline is:
raw embeddings -> two-layer tanh projection + row L2 normalization ->
temperature-scaled similarity (row softmax of pairwise dot products) ->
InfoNCE / soft-label KL losses. Tag vectors drive the soft labels via
cosine similarity (an all-zero tag vector has cosine 0 against everything,
including itself, so its row softens to uniform).

All public functions are pure and deterministic: identical inputs give
bit-identical results (reductions use numpy's deterministic summation).
The ``*_grads`` variants differentiate each loss with respect to the raw
embeddings and projection parameters using the in-module reverse-mode tape
(:mod:`radalign.autodiff`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad

_UNIT_NORM_ATOL = 1e-6


class NonPositiveTemperature(ValueError):
    pass


class AlphaOutOfRange(ValueError):
    pass


class ZeroVector(ValueError):
    pass


class NonFiniteComponent(ValueError):
    pass


def _as_batch(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a (N, d) batch with N, d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding batch contains non-finite entries")
    return arr


def _check_tau(tau: float) -> float:
    if not (tau > 0):
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    return float(tau)


@dataclass(frozen=True)
class ProjectionHead:
    """Two-layer projection: ``normalize(tanh(x W1 + b1) W2 + b2)`` row-wise."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"projection parameter {name} contains non-finite entries")
        d, h = self.w1.shape
        h2, d_out = self.w2.shape
        if h != h2 or self.b1.shape != (h,) or self.b2.shape != (d_out,):
            raise ValueError("projection parameter shapes are inconsistent")
        if d_out > d:
            raise ValueError(f"output dimension {d_out} exceeds input dimension {d}")

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    @classmethod
    def identity(cls, d: int) -> "ProjectionHead":
        return cls(np.eye(d), np.zeros(d), np.eye(d), np.zeros(d))

    @classmethod
    def random(cls, d: int, hidden: int, d_out: int, rng: np.random.Generator) -> "ProjectionHead":
        return cls(
            rng.standard_normal((d, hidden)) / math.sqrt(d),
            rng.standard_normal(hidden) * 0.1,
            rng.standard_normal((hidden, d_out)) / math.sqrt(hidden),
            rng.standard_normal(d_out) * 0.1,
        )


def _head_tensors(head: ProjectionHead) -> dict[str, ad.Tensor]:
    return {name: ad.Tensor(arr) for name, arr in head.arrays().items()}


def _project_graph(x: ad.Tensor, params: dict[str, ad.Tensor]) -> ad.Tensor:
    hidden = ad.tanh(x @ params["w1"] + params["b1"])
    out = hidden @ params["w2"] + params["b2"]
    norms = np.linalg.norm(out.value, axis=1)
    if np.any(norms < 1e-12):
        row = int(np.argmin(norms))
        raise ZeroVector(f"row {row} has norm {norms[row]:.3e} after projection")
    return ad.normalize_rows(out)


def project(batch, head: ProjectionHead) -> np.ndarray:
    """Apply the projection head; every output row has unit norm."""
    x = _as_batch(batch)
    if x.shape[1] != head.w1.shape[0]:
        raise ValueError(f"batch dimension {x.shape[1]} != head input {head.w1.shape[0]}")
    return _project_graph(ad.Tensor(x), _head_tensors(head)).value


def _check_unit_rows(arr: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_NORM_ATOL):
        raise ValueError(f"{name} rows must be unit-norm (did you project first?)")


def _similarity_graph(a: ad.Tensor, b: ad.Tensor, tau: float) -> ad.Tensor:
    return ad.row_softmax(ad.scale(a @ b.T, 1.0 / tau))


def similarity(a, b, tau: float) -> np.ndarray:
    """Row-stochastic similarity: softmax over ``<a_i, b_j> / tau``.

    Both batches must hold unit-norm rows, so the dot product is the cosine.
    """
    tau = _check_tau(tau)
    a, b = _as_batch(a), _as_batch(b)
    if a.shape != b.shape:
        raise ValueError(f"batch shapes differ: {a.shape} vs {b.shape}")
    _check_unit_rows(a, "first batch")
    _check_unit_rows(b, "second batch")
    return _similarity_graph(ad.Tensor(a), ad.Tensor(b), tau).value


def _infonce_graph(p: ad.Tensor) -> ad.Tensor:
    return ad.scale(ad.mean_all(ad.log(ad.diagonal(p))), -1.0)


def infonce(p) -> float:
    """Mean negative log of the diagonal of a row-stochastic matrix."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {p.shape}")
    return float(np.mean(-np.log(np.diagonal(p))))


def image_report_infonce(a_hat, b_hat, tau: float) -> float:
    """Symmetric instance-level contrastive loss over projected batches."""
    p_ab = similarity(a_hat, b_hat, tau)
    p_ba = similarity(b_hat, a_hat, tau)
    return 0.5 * (infonce(p_ab) + infonce(p_ba))


def region_sentence_infonce(region_hat, sentence_hat, tau: float) -> float:
    """Pairwise contrastive loss over aligned region/sentence embeddings.

    Rows are matched positives (one row per pair, flattened across the
    batch). An empty pair set contributes 0 and emits a warning.
    """
    regions = np.asarray(region_hat, dtype=np.float64)
    sentences = np.asarray(sentence_hat, dtype=np.float64)
    if regions.size == 0 and sentences.size == 0:
        warnings.warn("empty pair set: region-sentence loss contributes 0", stacklevel=2)
        return 0.0
    if regions.shape != sentences.shape:
        raise ValueError(
            f"region/sentence counts differ: {regions.shape} vs {sentences.shape}"
        )
    return image_report_infonce(regions, sentences, tau)


def one_hot_labels(n: int) -> np.ndarray:
    """Hard label matrix: identity rows."""
    if n < 1:
        raise ValueError("need at least one row")
    return np.eye(n, dtype=np.float64)


def _tags_matrix(tags) -> np.ndarray:
    arr = np.asarray(tags, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected (N, M) tag matrix, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("tag vectors must be binary")
    return arr


def soft_labels(tags, tau: float) -> np.ndarray:
    """Row softmax of pairwise cosine similarity between tag vectors.

    All-zero tag vectors use the convention ``<0, x> = 0``, which makes
    their rows (and the matching logits in other rows) maximally flat.
    """
    tau = _check_tau(tau)
    arr = _tags_matrix(tags)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    unit = np.divide(arr, norms, out=np.zeros_like(arr), where=norms > 0)
    cosine = unit @ unit.T
    shifted = cosine / tau
    shifted -= shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mix_labels(hard, soft, alpha: float) -> np.ndarray:
    """Convex combination ``(1 - alpha) * hard + alpha * soft``."""
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    hard = np.asarray(hard, dtype=np.float64)
    soft = np.asarray(soft, dtype=np.float64)
    if hard.shape != soft.shape:
        raise ValueError(f"label shapes differ: {hard.shape} vs {soft.shape}")
    return (1.0 - alpha) * hard + alpha * soft


def kl_soft_loss(p_hat, p) -> float:
    """Mean row-wise KL divergence ``KL(p_hat_i || p_i)`` with 0 log 0 = 0."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if p_hat.shape != p.shape:
        raise ValueError(f"shapes differ: {p_hat.shape} vs {p.shape}")
    mask = p_hat > 0
    terms = np.zeros_like(p_hat)
    terms[mask] = p_hat[mask] * (np.log(p_hat[mask]) - np.log(p[mask]))
    return float(terms.sum() / p_hat.shape[0])


def soft_label_kl(a_hat, b_hat, tags, tau: float, alpha: float) -> float:
    """Symmetric soft-label KL loss over projected batches and tag vectors."""
    p_hat = mix_labels(one_hot_labels(len(tags)), soft_labels(tags, tau), alpha)
    p_ab = similarity(a_hat, b_hat, tau)
    p_ba = similarity(b_hat, a_hat, tau)
    return 0.5 * (kl_soft_loss(p_hat, p_ab) + kl_soft_loss(p_hat, p_ba))


@dataclass(frozen=True)
class LossBreakdown:
    """The four objective components and their plain sum."""

    image_report_nce: float
    region_sentence_nce: float
    tag_bce: float
    soft_label_kl: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "image_report_nce": self.image_report_nce,
            "region_sentence_nce": self.region_sentence_nce,
            "tag_bce": self.tag_bce,
            "soft_label_kl": self.soft_label_kl,
            "total": self.total,
        }


def total_loss(
    image_report_nce: float,
    region_sentence_nce: float,
    tag_bce: float,
    soft_label_kl_value: float,
) -> LossBreakdown:
    """Unweighted sum of the four components; rejects non-finite inputs."""
    components = (image_report_nce, region_sentence_nce, tag_bce, soft_label_kl_value)
    for value in components:
        if not math.isfinite(value):
            raise NonFiniteComponent(f"loss component is not finite: {components}")
    return LossBreakdown(
        image_report_nce=float(image_report_nce),
        region_sentence_nce=float(region_sentence_nce),
        tag_bce=float(tag_bce),
        soft_label_kl=float(soft_label_kl_value),
        total=float(
            image_report_nce + region_sentence_nce + tag_bce + soft_label_kl_value
        ),
    )


# --- gradient entry points -------------------------------------------------
#
# Each builds the full raw-embedding -> projection -> loss graph on the tape
# and returns (value, grads) where grads has keys "a", "b", "head_a", "head_b"
# (the head entries are dicts w1/b1/w2/b2). These are what the finite
# difference checks compare against.


def _symmetric_infonce_graph(a: ad.Tensor, b: ad.Tensor, tau: float) -> ad.Tensor:
    loss_ab = _infonce_graph(_similarity_graph(a, b, tau))
    loss_ba = _infonce_graph(_similarity_graph(b, a, tau))
    return ad.scale(loss_ab + loss_ba, 0.5)


def _kl_graph(p_hat: np.ndarray, p: ad.Tensor) -> ad.Tensor:
    # Only the cross term -sum(p_hat * log p) varies; the entropy of p_hat
    # is a constant folded into the result.
    n = p_hat.shape[0]
    mask = p_hat > 0
    entropy = float((p_hat[mask] * np.log(p_hat[mask])).sum())
    cross = ad.sum_all(ad.mul(ad.Tensor(p_hat), ad.log(p)))
    return ad.scale(ad.Tensor(entropy) - cross, 1.0 / n)


def _grad_setup(raw_a, raw_b, head_a: ProjectionHead, head_b: ProjectionHead, tau: float):
    tau = _check_tau(tau)
    a = ad.Tensor(_as_batch(raw_a))
    b = ad.Tensor(_as_batch(raw_b))
    params_a = _head_tensors(head_a)
    params_b = _head_tensors(head_b)
    a_hat = _project_graph(a, params_a)
    b_hat = _project_graph(b, params_b)
    return tau, a, b, params_a, params_b, a_hat, b_hat


def _collect_grads(a, b, params_a, params_b) -> dict:
    return {
        "a": a.grad,
        "b": b.grad,
        "head_a": {name: t.grad for name, t in params_a.items()},
        "head_b": {name: t.grad for name, t in params_b.items()},
    }


def image_report_loss_grads(raw_a, raw_b, head_a, head_b, tau: float):
    tau, a, b, params_a, params_b, a_hat, b_hat = _grad_setup(raw_a, raw_b, head_a, head_b, tau)
    loss = _symmetric_infonce_graph(a_hat, b_hat, tau)
    loss.backward()
    return float(loss.value), _collect_grads(a, b, params_a, params_b)


def region_sentence_loss_grads(raw_regions, raw_sentences, head_a, head_b, tau: float):
    return image_report_loss_grads(raw_regions, raw_sentences, head_a, head_b, tau)


def soft_label_loss_grads(raw_a, raw_b, head_a, head_b, tags, tau: float, alpha: float):
    tau, a, b, params_a, params_b, a_hat, b_hat = _grad_setup(raw_a, raw_b, head_a, head_b, tau)
    p_hat = mix_labels(one_hot_labels(a.value.shape[0]), soft_labels(tags, tau), alpha)
    loss_ab = _kl_graph(p_hat, _similarity_graph(a_hat, b_hat, tau))
    loss_ba = _kl_graph(p_hat, _similarity_graph(b_hat, a_hat, tau))
    loss = ad.scale(loss_ab + loss_ba, 0.5)
    loss.backward()
    return float(loss.value), _collect_grads(a, b, params_a, params_b)
