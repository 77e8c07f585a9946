import math

import numpy as np
import pytest

import oracles
from radalign.checks import (
    central_difference,
    relative_gradient_error,
    run_loss_gradient_checks,
)
from radalign.losses import (
    AlphaOutOfRange,
    LossBreakdown,
    NonFiniteComponent,
    NonPositiveTemperature,
    ProjectionHead,
    ZeroVector,
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

# Values computed with the double-loop oracles in oracles.py.
P_SELF = 0.7310585786300049          # e / (e + 1)
P_CROSS = 0.2689414213699951         # 1 / (e + 1)
NCE_IDENTITY = 0.3132616875182228    # -ln(e / (e + 1))
KL_ROW = 0.0405525997122319          # (0.85, 0.15) against (P_SELF, P_CROSS)


def _unit(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class TestProject:
    def test_identity_head_preserves_one_hot_rows(self):
        head = ProjectionHead.identity(4)
        batch = np.eye(4)
        np.testing.assert_allclose(project(batch, head), batch, atol=1e-15)

    def test_output_rows_unit_norm(self):
        rng = np.random.default_rng(0)
        head = ProjectionHead.random(8, 6, 4, rng)
        out = project(rng.standard_normal((10, 8)), head)
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)

    def test_zero_row_with_zero_biases_raises(self):
        head = ProjectionHead(np.eye(3), np.zeros(3), np.eye(3), np.zeros(3))
        with pytest.raises(ZeroVector):
            project(np.zeros((2, 3)), head)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            project(np.ones((2, 5)), ProjectionHead.identity(3))

    def test_output_dimension_cannot_exceed_input(self):
        with pytest.raises(ValueError):
            ProjectionHead(np.ones((2, 2)), np.zeros(2), np.ones((2, 3)), np.zeros(3))


class TestSimilarity:
    def test_single_element(self):
        np.testing.assert_array_equal(similarity([[1.0]], [[1.0]], 0.07), [[1.0]])

    def test_identity_rows_tau_one(self):
        p = similarity(np.eye(2), np.eye(2), 1.0)
        np.testing.assert_allclose(p, [[P_SELF, P_CROSS], [P_CROSS, P_SELF]], atol=1e-15)

    def test_rows_sum_to_one_across_sizes(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 65))
            d = int(rng.integers(2, 129))
            tau = float(rng.uniform(0.01, 10.0))
            p = similarity(_unit(rng.standard_normal((n, d))),
                           _unit(rng.standard_normal((n, d))), tau)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(p > 0) and np.all(p <= 1)

    def test_argmax_invariant_under_temperature(self):
        rng = np.random.default_rng(2)
        a = _unit(rng.standard_normal((8, 16)))
        b = _unit(rng.standard_normal((8, 16)))
        reference = np.argmax(similarity(a, b, 1.0), axis=1)
        for tau in (0.07, 0.5, 5.0):
            np.testing.assert_array_equal(np.argmax(similarity(a, b, tau), axis=1), reference)

    def test_non_positive_temperature_rejected(self):
        with pytest.raises(NonPositiveTemperature):
            similarity(np.eye(2), np.eye(2), 0.0)

    def test_non_unit_rows_rejected(self):
        with pytest.raises(ValueError, match="unit-norm"):
            similarity(2.0 * np.eye(2), np.eye(2), 1.0)


class TestInfonce:
    def test_single_element_is_zero(self):
        assert infonce([[1.0]]) == 0.0

    def test_uniform_four(self):
        assert abs(infonce(np.full((4, 4), 0.25)) - math.log(4)) < 1e-12

    def test_identity_rows_value(self):
        p = similarity(np.eye(2), np.eye(2), 1.0)
        assert abs(infonce(p) - NCE_IDENTITY) < 1e-12


class TestRegionSentenceLoss:
    def test_single_pair_is_zero(self):
        assert region_sentence_infonce([[1.0]], [[1.0]], 0.07) == 0.0

    def test_orthogonal_rows_match_identity_example(self):
        value = region_sentence_infonce(np.eye(2), np.eye(2), 1.0)
        assert abs(value - NCE_IDENTITY) < 1e-12

    def test_empty_pair_set_warns_and_returns_zero(self):
        with pytest.warns(UserWarning, match="empty pair set"):
            assert region_sentence_infonce(np.empty((0, 4)), np.empty((0, 4)), 1.0) == 0.0

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            region_sentence_infonce(np.eye(3), np.eye(2), 1.0)


class TestSoftLabels:
    def test_identical_nonzero_tags_give_uniform_rows(self):
        tags = np.tile([1, 0, 1], (5, 1))
        np.testing.assert_allclose(soft_labels(tags, 0.5), np.full((5, 5), 0.2), atol=1e-12)

    def test_orthogonal_one_hot_tags(self):
        p = soft_labels(np.eye(2, dtype=int), 1.0)
        np.testing.assert_allclose(p, [[P_SELF, P_CROSS], [P_CROSS, P_SELF]], atol=1e-15)
        assert p[0, 0] > p[0, 1]

    def test_zero_tag_row_is_uniform(self):
        tags = np.array([[1, 0], [0, 1], [0, 0]])
        p = soft_labels(tags, 1.0)
        np.testing.assert_allclose(p[2], np.full(3, 1.0 / 3.0), atol=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        tags = (rng.random((6, 5)) < 0.5).astype(int)
        perm = rng.permutation(6)
        direct = soft_labels(tags[perm], 0.7)
        permuted = soft_labels(tags, 0.7)[np.ix_(perm, perm)]
        np.testing.assert_allclose(direct, permuted, atol=1e-15)

    def test_non_binary_tags_rejected(self):
        with pytest.raises(ValueError):
            soft_labels(np.array([[0.5, 1.0]]), 1.0)


class TestMixLabels:
    def test_alpha_zero_returns_hard_exactly(self):
        hard = one_hot_labels(3)
        soft = np.full((3, 3), 1.0 / 3.0)
        np.testing.assert_array_equal(mix_labels(hard, soft, 0.0), hard)

    def test_alpha_one_returns_soft_exactly(self):
        hard = one_hot_labels(3)
        soft = np.full((3, 3), 1.0 / 3.0)
        np.testing.assert_array_equal(mix_labels(hard, soft, 1.0), soft)

    def test_halfway_mix(self):
        mixed = mix_labels(np.array([[1.0, 0.0]]), np.array([[0.7, 0.3]]), 0.5)
        np.testing.assert_allclose(mixed, [[0.85, 0.15]], atol=1e-15)

    def test_rows_stay_stochastic(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(1, 17))
            tags = (rng.random((n, 6)) < 0.5).astype(int)
            mixed = mix_labels(one_hot_labels(n), soft_labels(tags, 0.3), float(rng.random()))
            np.testing.assert_allclose(mixed.sum(axis=1), 1.0, atol=1e-9)

    def test_alpha_out_of_range(self):
        with pytest.raises(AlphaOutOfRange):
            mix_labels(one_hot_labels(2), one_hot_labels(2), 1.5)


class TestKlSoftLoss:
    def test_identical_distributions_give_zero(self):
        p = similarity(_unit(np.random.default_rng(5).standard_normal((6, 8))),
                       _unit(np.random.default_rng(6).standard_normal((6, 8))), 0.5)
        assert abs(kl_soft_loss(p, p)) < 1e-12

    def test_one_hot_labels_reduce_to_infonce(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 17))
            p = similarity(_unit(rng.standard_normal((n, 8))),
                           _unit(rng.standard_normal((n, 8))), 0.2)
            assert abs(kl_soft_loss(one_hot_labels(n), p) - infonce(p)) < 1e-12

    def test_single_row_example(self):
        value = kl_soft_loss([[0.85, 0.15]], [[P_SELF, P_CROSS]])
        assert abs(value - KL_ROW) < 1e-12

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(1, 10))
            tags = (rng.random((n, 4)) < 0.5).astype(int)
            p_hat = mix_labels(one_hot_labels(n), soft_labels(tags, 0.5), float(rng.random()))
            p = similarity(_unit(rng.standard_normal((n, 6))),
                           _unit(rng.standard_normal((n, 6))), 0.5)
            assert kl_soft_loss(p_hat, p) >= 0.0


class TestTotalLoss:
    def test_zeros(self):
        assert total_loss(0.0, 0.0, 0.0, 0.0).total == 0.0

    def test_unweighted_sum(self):
        breakdown = total_loss(1.0, 2.0, 3.0, 4.0)
        assert breakdown.total == 10.0
        assert breakdown == LossBreakdown(1.0, 2.0, 3.0, 4.0, 10.0)

    def test_total_is_same_precision_sum(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            parts = rng.random(4).tolist()
            assert total_loss(*parts).total == parts[0] + parts[1] + parts[2] + parts[3]

    def test_nan_component_rejected(self):
        with pytest.raises(NonFiniteComponent):
            total_loss(float("nan"), 0.0, 0.0, 0.0)


class TestOracleEquivalence:
    """Library matrices and losses against the double-loop oracles, N <= 4."""

    def test_projection_matches_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            n, d, h, d_out = (int(rng.integers(1, 5)) for _ in range(4))
            head = ProjectionHead.random(d, h, min(d_out, d), rng)
            batch = rng.standard_normal((n, d))
            expected = oracles.project_rows(
                batch.tolist(), head.w1.tolist(), head.b1.tolist(),
                head.w2.tolist(), head.b2.tolist(),
            )
            np.testing.assert_allclose(project(batch, head), expected, atol=1e-12)

    def test_similarity_and_infonce_match_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            tau = float(rng.uniform(0.05, 5.0))
            a = _unit(rng.standard_normal((n, 6)))
            b = _unit(rng.standard_normal((n, 6)))
            expected = oracles.similarity_matrix(a.tolist(), b.tolist(), tau)
            p = similarity(a, b, tau)
            np.testing.assert_allclose(p, expected, atol=1e-12)
            assert abs(infonce(p) - oracles.infonce_value(expected)) < 1e-12

    def test_soft_labels_and_kl_match_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            tau = float(rng.uniform(0.1, 3.0))
            alpha = float(rng.random())
            tags = (rng.random((n, 5)) < 0.5).astype(int)
            soft = soft_labels(tags, tau)
            expected_soft = oracles.soft_label_matrix(tags.tolist(), tau)
            np.testing.assert_allclose(soft, expected_soft, atol=1e-12)

            hard = one_hot_labels(n)
            mixed = mix_labels(hard, soft, alpha)
            expected_mixed = oracles.mix(hard.tolist(), expected_soft, alpha)
            np.testing.assert_allclose(mixed, expected_mixed, atol=1e-12)

            p = similarity(_unit(rng.standard_normal((n, 4))),
                           _unit(rng.standard_normal((n, 4))), tau)
            assert abs(
                kl_soft_loss(mixed, p) - oracles.kl_value(expected_mixed, p.tolist())
            ) < 1e-12


class TestGradients:
    def test_all_three_losses_pass_finite_difference_check(self):
        for result in run_loss_gradient_checks(seed=0, instances=3):
            assert result.passed, f"{result.name}: {result.max_error}"

    def test_alpha_zero_soft_gradients_match_infonce_gradients(self):
        from radalign.losses import image_report_loss_grads, soft_label_loss_grads

        rng = np.random.default_rng(13)
        raw_a = rng.standard_normal((4, 6))
        raw_b = rng.standard_normal((4, 6))
        head_a = ProjectionHead.random(6, 5, 4, rng)
        head_b = ProjectionHead.random(6, 5, 4, rng)
        tags = (rng.random((4, 5)) < 0.5).astype(int)
        value_nce, grads_nce = image_report_loss_grads(raw_a, raw_b, head_a, head_b, 0.5)
        value_kl, grads_kl = soft_label_loss_grads(raw_a, raw_b, head_a, head_b, tags, 0.5, 0.0)
        assert abs(value_nce - value_kl) < 1e-12
        np.testing.assert_allclose(grads_nce["a"], grads_kl["a"], atol=1e-12)
        np.testing.assert_allclose(grads_nce["b"], grads_kl["b"], atol=1e-12)

    def test_projected_loss_value_matches_plain_pipeline(self):
        from radalign.losses import image_report_loss_grads

        rng = np.random.default_rng(14)
        raw_a = rng.standard_normal((5, 8))
        raw_b = rng.standard_normal((5, 8))
        head_a = ProjectionHead.random(8, 6, 4, rng)
        head_b = ProjectionHead.random(8, 6, 4, rng)
        value, _ = image_report_loss_grads(raw_a, raw_b, head_a, head_b, 0.3)
        plain = image_report_infonce(project(raw_a, head_a), project(raw_b, head_b), 0.3)
        assert abs(value - plain) < 1e-12


def test_soft_label_kl_composite_matches_parts():
    rng = np.random.default_rng(15)
    a = _unit(rng.standard_normal((5, 7)))
    b = _unit(rng.standard_normal((5, 7)))
    tags = (rng.random((5, 4)) < 0.5).astype(int)
    composite = soft_label_kl(a, b, tags, 0.4, 0.6)
    p_hat = mix_labels(one_hot_labels(5), soft_labels(tags, 0.4), 0.6)
    expected = 0.5 * (
        kl_soft_loss(p_hat, similarity(a, b, 0.4))
        + kl_soft_loss(p_hat, similarity(b, a, 0.4))
    )
    assert abs(composite - expected) < 1e-15
