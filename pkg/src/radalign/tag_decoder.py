"""Cross-attention tag decoder: disease queries attend over visual tokens.

A single-head scaled dot-product attention block with a shared scalar
readout per query:

    attn    = rowsoftmax((Q Wq)(Z Wk)^T / sqrt(d))
    context = attn (Z Wv)
    prob_j  = logistic(<context_j, w_out> + b_out)

The binary cross-entropy objective treats each disease class independently;
probabilities are clamped to ``[eps, 1 - eps]`` (eps = 1e-12) before the
logarithms so the loss stays finite at saturation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad

EPS = 1e-12


class DimensionMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DecoderParams:
    """Projection matrices plus the shared readout applied to every query."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    w_out: np.ndarray
    b_out: float

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv"):
            arr = getattr(self, name)
            if arr.shape != (d, d):
                raise DimensionMismatch(f"{name} must be ({d}, {d}), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.w_out.shape != (d,):
            raise DimensionMismatch(f"w_out must be ({d},), got {self.w_out.shape}")
        if not (np.all(np.isfinite(self.w_out)) and math.isfinite(self.b_out)):
            raise ValueError("readout parameters contain non-finite entries")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "wq": self.wq,
            "wk": self.wk,
            "wv": self.wv,
            "w_out": self.w_out,
            "b_out": np.asarray(self.b_out, dtype=np.float64),
        }

    @classmethod
    def identity(cls, d: int) -> "DecoderParams":
        return cls(np.eye(d), np.eye(d), np.eye(d), np.zeros(d), 0.0)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "DecoderParams":
        s = 1.0 / math.sqrt(d)
        return cls(
            rng.standard_normal((d, d)) * s,
            rng.standard_normal((d, d)) * s,
            rng.standard_normal((d, d)) * s,
            rng.standard_normal(d) * s,
            float(rng.standard_normal()),
        )

    def save(self, path: str | Path) -> None:
        doc = {
            "d": self.dim,
            "wq": self.wq.tolist(),
            "wk": self.wk.tolist(),
            "wv": self.wv.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DecoderParams":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            np.asarray(doc["wq"], dtype=np.float64),
            np.asarray(doc["wk"], dtype=np.float64),
            np.asarray(doc["wv"], dtype=np.float64),
            np.asarray(doc["w_out"], dtype=np.float64),
            float(doc["b_out"]),
        )


def _as_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _decode_graph(tokens: np.ndarray, queries: np.ndarray, tensors: dict[str, ad.Tensor]):
    d = queries.shape[1]
    z = ad.Tensor(tokens)
    q = ad.Tensor(queries)
    logits = ad.scale((q @ tensors["wq"]) @ ad.transpose(z @ tensors["wk"]), 1.0 / math.sqrt(d))
    attn = ad.row_softmax(logits)
    context = attn @ (z @ tensors["wv"])
    w_col = ad.reshape(tensors["w_out"], (d, 1))
    out = ad.reshape(context @ w_col, (queries.shape[0],)) + tensors["b_out"]
    return ad.sigmoid(out), attn


def decode_tags(tokens, queries, params: DecoderParams) -> np.ndarray:
    """Per-class probabilities, one per query row, each in (0, 1)."""
    tokens = _as_matrix(tokens, "visual tokens")
    queries = _as_matrix(queries, "queries")
    if tokens.shape[1] != queries.shape[1] or tokens.shape[1] != params.dim:
        raise DimensionMismatch(
            f"dimension mismatch: tokens {tokens.shape}, queries {queries.shape}, "
            f"params d={params.dim}"
        )
    probs, _ = _decode_graph(tokens, queries, {k: ad.Tensor(v) for k, v in params.arrays().items()})
    return probs.value


def attention_weights(tokens, queries, params: DecoderParams) -> np.ndarray:
    """The (M_Q, M_Z) attention matrix; rows sum to 1."""
    tokens = _as_matrix(tokens, "visual tokens")
    queries = _as_matrix(queries, "queries")
    _, attn = _decode_graph(tokens, queries, {k: ad.Tensor(v) for k, v in params.arrays().items()})
    return attn.value


def bce_loss(probs, labels) -> float:
    """Mean binary cross-entropy over classes for one sample."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape or probs.ndim != 1:
        raise LengthMismatch(f"probs {probs.shape} and labels {labels.shape} must be equal 1-D")
    p = np.clip(probs, EPS, 1.0 - EPS)
    return float(np.mean(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))))


def batch_bce_loss(token_batches, queries, params: DecoderParams, tag_matrix) -> float:
    """BCE averaged over a batch of samples (and over classes within each)."""
    tags = np.asarray(tag_matrix, dtype=np.float64)
    if len(token_batches) != tags.shape[0]:
        raise LengthMismatch(
            f"{len(token_batches)} token batches but {tags.shape[0]} tag vectors"
        )
    if len(token_batches) == 0:
        return 0.0
    values = [
        bce_loss(decode_tags(tokens, queries, params), tags[i])
        for i, tokens in enumerate(token_batches)
    ]
    return float(np.mean(values))


def decode_bce_grads(tokens, queries, params: DecoderParams, labels):
    """Loss value and analytic gradients of ``bce(decode_tags)`` w.r.t. params."""
    tokens = _as_matrix(tokens, "visual tokens")
    queries = _as_matrix(queries, "queries")
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (queries.shape[0],):
        raise LengthMismatch(f"labels {labels.shape} must match query count {queries.shape[0]}")
    tensors = {k: ad.Tensor(v) for k, v in params.arrays().items()}
    probs, _ = _decode_graph(tokens, queries, tensors)
    p = ad.clip(probs, EPS, 1.0 - EPS)
    log_p = ad.log(p)
    log_1p = ad.log(ad.Tensor(1.0) - p)
    loss = ad.scale(
        ad.sum_all(ad.Tensor(labels) * log_p + ad.Tensor(1.0 - labels) * log_1p),
        -1.0 / labels.size,
    )
    loss.backward()
    grads = {name: t.grad for name, t in tensors.items()}
    grads["b_out"] = grads["b_out"].reshape(())
    return float(loss.value), grads


def decoder_grad_check(tokens, queries, params: DecoderParams, labels, step: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients."""
    from .checks import central_difference, relative_gradient_error

    _, analytic = decode_bce_grads(tokens, queries, params, labels)
    arrays = params.arrays()
    names = list(arrays)

    def loss_fn(*args) -> float:
        trial = DecoderParams(
            wq=args[names.index("wq")],
            wk=args[names.index("wk")],
            wv=args[names.index("wv")],
            w_out=args[names.index("w_out")],
            b_out=float(args[names.index("b_out")]),
        )
        return bce_loss(decode_tags(tokens, queries, trial), labels)

    numeric = central_difference(loss_fn, [arrays[n] for n in names], step=step)
    return max(
        relative_gradient_error(analytic[name], numeric[i]) for i, name in enumerate(names)
    )
