import math

import numpy as np
import pytest

import oracles
from radalign.tag_decoder import (
    DecoderParams,
    DimensionMismatch,
    LengthMismatch,
    attention_weights,
    batch_bce_loss,
    bce_loss,
    decode_bce_grads,
    decode_tags,
    decoder_grad_check,
)

# Worked example (d=2, identity projections, Z=I, q=(1,0), w_out=(1,0), b=0),
# values from the brute-force oracle in oracles.py.
ATTN_NEAR = 0.6697615493266569
ATTN_FAR = 0.3302384506733431
PROB = 0.6614497640519913
BCE_POSITIVE = 0.4133212407871061


def _worked_example():
    eye = np.eye(2)
    params = DecoderParams(eye.copy(), eye.copy(), eye.copy(), np.array([1.0, 0.0]), 0.0)
    return np.eye(2), np.array([[1.0, 0.0]]), params


class TestDecodeTags:
    def test_worked_example_attention_and_probability(self):
        tokens, queries, params = _worked_example()
        attn = attention_weights(tokens, queries, params)
        np.testing.assert_allclose(attn, [[ATTN_NEAR, ATTN_FAR]], atol=1e-15)
        probs = decode_tags(tokens, queries, params)
        np.testing.assert_allclose(probs, [PROB], atol=1e-15)

    def test_identical_tokens_give_uniform_attention(self):
        rng = np.random.default_rng(0)
        token = rng.standard_normal(4)
        tokens = np.tile(token, (5, 1))
        queries = rng.standard_normal((3, 4))
        params = DecoderParams.random(4, rng)
        attn = attention_weights(tokens, queries, params)
        np.testing.assert_allclose(attn, np.full((3, 5), 0.2), atol=1e-12)

    def test_output_length_equals_query_count(self):
        rng = np.random.default_rng(1)
        params = DecoderParams.random(3, rng)
        for m_z in (1, 4, 9):
            probs = decode_tags(rng.standard_normal((m_z, 3)), rng.standard_normal((7, 3)), params)
            assert probs.shape == (7,)
            assert np.all((probs > 0) & (probs < 1))

    def test_attention_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        attn = attention_weights(
            rng.standard_normal((6, 5)), rng.standard_normal((4, 5)),
            DecoderParams.random(5, rng),
        )
        np.testing.assert_allclose(attn.sum(axis=1), 1.0, atol=1e-12)

    def test_token_order_invariance(self):
        rng = np.random.default_rng(3)
        tokens = rng.standard_normal((6, 4))
        queries = rng.standard_normal((3, 4))
        params = DecoderParams.random(4, rng)
        perm = rng.permutation(6)
        base = decode_tags(tokens, queries, params)
        permuted = decode_tags(tokens[perm], queries, params)
        np.testing.assert_allclose(permuted, base, atol=1e-12)
        attn = attention_weights(tokens, queries, params)
        attn_perm = attention_weights(tokens[perm], queries, params)
        np.testing.assert_allclose(attn_perm, attn[:, perm], atol=1e-12)

    def test_shift_invariance_of_attention_logits(self):
        # Tokens share a constant first coordinate, so adding e1 v^T to Wk
        # shifts every key by v: each attention row's logits move by a
        # per-row constant while the value path is untouched.
        rng = np.random.default_rng(4)
        tokens = np.hstack([np.ones((5, 1)), rng.standard_normal((5, 3))])
        queries = rng.standard_normal((3, 4))
        params = DecoderParams.random(4, rng)
        shift = np.zeros((4, 4))
        shift[0] = rng.standard_normal(4)
        shifted = DecoderParams(params.wq, params.wk + shift, params.wv,
                                params.w_out, params.b_out)
        np.testing.assert_allclose(
            decode_tags(tokens, queries, shifted),
            decode_tags(tokens, queries, params),
            atol=1e-12,
        )

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        with pytest.raises(DimensionMismatch):
            decode_tags(rng.standard_normal((2, 3)), rng.standard_normal((2, 4)),
                        DecoderParams.random(4, rng))

    def test_oracle_equivalence_small_instances(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            d = int(rng.integers(1, 5))
            m_z = int(rng.integers(1, 5))
            m_q = int(rng.integers(1, 5))
            tokens = rng.standard_normal((m_z, d))
            queries = rng.standard_normal((m_q, d))
            params = DecoderParams.random(d, rng)
            expected = oracles.decode_probabilities(
                tokens.tolist(), queries.tolist(), params.wq.tolist(),
                params.wk.tolist(), params.wv.tolist(), params.w_out.tolist(),
                params.b_out,
            )
            np.testing.assert_allclose(decode_tags(tokens, queries, params), expected, atol=1e-12)
            labels = (rng.random(m_q) < 0.5).astype(float)
            assert abs(
                bce_loss(decode_tags(tokens, queries, params), labels)
                - oracles.bce_value(expected, labels.tolist())
            ) < 1e-12


class TestBceLoss:
    def test_half_probabilities_give_ln_two(self):
        for labels in ([0.0, 1.0], [1.0, 1.0]):
            assert abs(bce_loss([0.5, 0.5], labels) - math.log(2)) < 1e-12

    def test_perfect_prediction_is_tiny(self):
        assert bce_loss([1.0, 0.0], [1.0, 0.0]) <= 1e-11
        assert bce_loss([1.0, 0.0], [1.0, 0.0]) >= 0.0

    def test_worked_example_value(self):
        tokens, queries, params = _worked_example()
        probs = decode_tags(tokens, queries, params)
        assert abs(bce_loss(probs, [1.0]) - BCE_POSITIVE) < 1e-15

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            bce_loss([0.5], [1.0, 0.0])

    def test_batch_average(self):
        rng = np.random.default_rng(7)
        params = DecoderParams.random(3, rng)
        queries = rng.standard_normal((2, 3))
        batches = [rng.standard_normal((4, 3)) for _ in range(3)]
        tags = (rng.random((3, 2)) < 0.5).astype(int)
        expected = np.mean(
            [bce_loss(decode_tags(z, queries, params), tags[i]) for i, z in enumerate(batches)]
        )
        assert abs(batch_bce_loss(batches, queries, params, tags) - expected) < 1e-15

    def test_empty_batch_is_zero(self):
        rng = np.random.default_rng(8)
        params = DecoderParams.random(3, rng)
        assert batch_bce_loss([], rng.standard_normal((2, 3)), params, np.zeros((0, 2))) == 0.0


class TestGradients:
    def test_random_instances_pass_finite_difference_check(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            d = int(rng.integers(2, 9))
            tokens = rng.standard_normal((int(rng.integers(1, 9)), d))
            queries = rng.standard_normal((int(rng.integers(1, 9)), d))
            params = DecoderParams.random(d, rng)
            labels = (rng.random(queries.shape[0]) < 0.5).astype(float)
            assert decoder_grad_check(tokens, queries, params, labels) <= 1e-4

    def test_zero_readout_kills_value_path_gradient(self):
        rng = np.random.default_rng(9)
        d = 4
        tokens = rng.standard_normal((3, d))
        queries = rng.standard_normal((2, d))
        params = DecoderParams(
            rng.standard_normal((d, d)), rng.standard_normal((d, d)),
            rng.standard_normal((d, d)), np.zeros(d), 0.3,
        )
        probs = decode_tags(tokens, queries, params)
        np.testing.assert_allclose(probs, 1.0 / (1.0 + math.exp(-0.3)), atol=1e-15)
        _, grads = decode_bce_grads(tokens, queries, params, np.array([1.0, 0.0]))
        np.testing.assert_array_equal(grads["wv"], np.zeros((d, d)))
        np.testing.assert_array_equal(grads["wq"], np.zeros((d, d)))

    def test_repeated_check_is_bit_identical(self):
        rng = np.random.default_rng(10)
        d = 3
        tokens = rng.standard_normal((4, d))
        queries = rng.standard_normal((2, d))
        params = DecoderParams.random(d, rng)
        labels = np.array([1.0, 0.0])
        first = decoder_grad_check(tokens, queries, params, labels)
        second = decoder_grad_check(tokens, queries, params, labels)
        assert first == second


class TestSerialization:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        params = DecoderParams.random(5, rng)
        path = tmp_path / "decoder.json"
        params.save(path)
        loaded = DecoderParams.load(path)
        for name, arr in params.arrays().items():
            np.testing.assert_array_equal(loaded.arrays()[name], arr)
