"""Naive reference implementations used to cross-check the library.

Everything here is written as explicit double loops over scalars, with no
shared code or vectorized shortcuts, so it stays an independent oracle for
the numpy implementations under test.
"""
from __future__ import annotations

import math


def project_rows(batch, w1, b1, w2, b2):
    """Row-by-row two-layer tanh map followed by L2 normalization."""
    out = []
    for row in batch:
        hidden = []
        for j in range(len(b1)):
            acc = b1[j]
            for i in range(len(row)):
                acc += row[i] * w1[i][j]
            hidden.append(math.tanh(acc))
        raw = []
        for j in range(len(b2)):
            acc = b2[j]
            for i in range(len(hidden)):
                acc += hidden[i] * w2[i][j]
            raw.append(acc)
        norm = math.sqrt(sum(v * v for v in raw))
        out.append([v / norm for v in raw])
    return out


def softmax_row(logits):
    exps = [math.exp(v) for v in logits]
    total = sum(exps)
    return [e / total for e in exps]


def similarity_matrix(a, b, tau):
    """Row-stochastic exp/sum matrix over dot products (rows assumed unit)."""
    out = []
    for i in range(len(a)):
        logits = []
        for j in range(len(b)):
            dot = sum(a[i][k] * b[j][k] for k in range(len(a[i])))
            logits.append(dot / tau)
        out.append(softmax_row(logits))
    return out


def infonce_value(p):
    total = 0.0
    for i in range(len(p)):
        total += -math.log(p[i][i])
    return total / len(p)


def cosine(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(u[k] * v[k] for k in range(len(u))) / (nu * nv)


def soft_label_matrix(tags, tau):
    out = []
    for i in range(len(tags)):
        logits = [cosine(tags[i], tags[j]) / tau for j in range(len(tags))]
        out.append(softmax_row(logits))
    return out


def kl_value(p_hat, p):
    total = 0.0
    for i in range(len(p_hat)):
        for j in range(len(p_hat[i])):
            if p_hat[i][j] > 0.0:
                total += p_hat[i][j] * (math.log(p_hat[i][j]) - math.log(p[i][j]))
    return total / len(p_hat)


def mix(hard, soft, alpha):
    return [
        [(1.0 - alpha) * hard[i][j] + alpha * soft[i][j] for j in range(len(hard[i]))]
        for i in range(len(hard))
    ]


def decode_probabilities(tokens, queries, wq, wk, wv, w_out, b_out):
    """Brute-force single-head cross attention with a scalar readout."""
    d = len(queries[0])

    def matvec(m, v):
        return [sum(v[i] * m[i][j] for i in range(len(v))) for j in range(len(m[0]))]

    keys = [matvec(wk, z) for z in tokens]
    values = [matvec(wv, z) for z in tokens]
    probs = []
    for q in queries:
        projected = matvec(wq, q)
        logits = [
            sum(projected[k] * keys[j][k] for k in range(d)) / math.sqrt(d)
            for j in range(len(tokens))
        ]
        attn = softmax_row(logits)
        context = [
            sum(attn[j] * values[j][k] for j in range(len(tokens))) for k in range(d)
        ]
        logit = sum(context[k] * w_out[k] for k in range(d)) + b_out
        probs.append(1.0 / (1.0 + math.exp(-logit)))
    return probs


def bce_value(probs, labels, eps=1e-12):
    total = 0.0
    for j in range(len(probs)):
        p = min(max(probs[j], eps), 1.0 - eps)
        total += -(labels[j] * math.log(p) + (1.0 - labels[j]) * math.log(1.0 - p))
    return total / len(probs)
