import numpy as np
import pytest

from milrank.loss import (
    BagLossBreakdown,
    LossParams,
    batch_loss,
    pair_loss,
    pair_loss_grad,
    weight_decay_term,
)
from milrank.network import init_model

ZERO_EXTRAS = LossParams(smoothness_weight=0.0, sparsity_weight=0.0)


def jittered_scores(rng, m):
    """Random score vectors with well-separated entries (unique argmax,
    hinge away from its kink), so finite differences are valid."""
    while True:
        p = rng.uniform(0.05, 0.95, size=m)
        q = rng.uniform(0.05, 0.95, size=m)
        gap_p = np.sort(p)[-1] - np.sort(p)[-2]
        gap_q = np.sort(q)[-1] - np.sort(q)[-2]
        hinge_arg = 1.0 - p.max() + q.max()
        if gap_p > 1e-3 and gap_q > 1e-3 and abs(hinge_arg) > 1e-3:
            return p, q


class TestPairLoss:
    def test_worked_example(self):
        params = LossParams(smoothness_weight=0.1, sparsity_weight=0.1, margin=1.0)
        out = pair_loss([0.5, 0.7], [0.2, 0.1], params)
        assert abs(out.hinge - 0.5) < 1e-12
        assert abs(out.smoothness - 0.004) < 1e-12
        assert abs(out.sparsity - 0.12) < 1e-12
        assert abs(out.total - 0.624) < 1e-12
        assert out.argmax_pos == 1 and out.argmax_neg == 0

    def test_perfect_separation(self):
        out = pair_loss(np.ones(4), np.zeros(4), ZERO_EXTRAS)
        assert out.total == 0.0

    def test_all_zero_scores(self):
        out = pair_loss(np.zeros(4), np.zeros(4), ZERO_EXTRAS)
        assert out.hinge == 1.0

    def test_tie_breaks_to_lowest_index(self):
        out = pair_loss([0.7, 0.7, 0.1], [0.3, 0.3, 0.3], LossParams())
        assert out.argmax_pos == 0 and out.argmax_neg == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pair_loss([0.1, 0.2], [0.1, 0.2, 0.3], LossParams())

    def test_single_segment_rejected(self):
        with pytest.raises(ValueError):
            pair_loss([0.1], [0.2], LossParams())

    def test_scores_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            pair_loss([0.1, 1.2], [0.1, 0.2], LossParams())


class TestPairLossProperties:
    def test_total_non_negative_and_hinge_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            m = int(rng.integers(2, 40))
            p = rng.uniform(0, 1, m)
            q = rng.uniform(0, 1, m)
            params = LossParams(smoothness_weight=rng.uniform(0, 1),
                                sparsity_weight=rng.uniform(0, 1))
            out = pair_loss(p, q, params)
            assert out.total >= 0.0
            assert 0.0 <= out.hinge <= params.margin + 1.0

    def test_negative_bag_permutation_invariance(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0, 1, 8)
        q = rng.uniform(0, 1, 8)
        base = pair_loss(p, q, LossParams())
        shuffled = pair_loss(p, rng.permutation(q), LossParams())
        assert shuffled.hinge == base.hinge
        assert shuffled.smoothness == base.smoothness
        assert shuffled.sparsity == base.sparsity

    def test_raising_max_pos_never_raises_hinge(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p = rng.uniform(0, 0.8, 6)
            q = rng.uniform(0, 1, 6)
            i = int(np.argmax(p))
            p_up = p.copy()
            p_up[i] = min(1.0, p[i] + rng.uniform(0, 0.2))
            assert pair_loss(p_up, q, ZERO_EXTRAS).hinge <= pair_loss(p, q, ZERO_EXTRAS).hinge


class TestPairLossGrad:
    def test_flat_region_zero_grad(self):
        # hinge inactive and no extra terms
        params = LossParams(smoothness_weight=0.0, sparsity_weight=0.0)
        dpos, dneg = pair_loss_grad([1.0, 1.0], [0.0, 0.0], params)
        assert not dpos.any() and not dneg.any()

    def test_pure_sparsity_grad(self):
        c = 0.37
        params = LossParams(smoothness_weight=0.0, sparsity_weight=c)
        dpos, dneg = pair_loss_grad([1.0, 1.0, 1.0], [0.0, 0.0, 0.0], params)
        assert np.array_equal(dpos, np.full(3, c))
        assert not dneg.any()

    def test_gradient_sparsity_without_extras(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p, q = jittered_scores(rng, 6)
            dpos, dneg = pair_loss_grad(p, q, ZERO_EXTRAS)
            assert np.count_nonzero(dpos) <= 1
            assert np.count_nonzero(dneg) <= 1

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(4)
        params = LossParams(smoothness_weight=0.03, sparsity_weight=0.02)
        h = 1e-7
        for _ in range(60):
            p, q = jittered_scores(rng, 5)
            dpos, dneg = pair_loss_grad(p, q, params)
            for vec, grad in ((p, dpos), (q, dneg)):
                for i in range(5):
                    up, down = vec.copy(), vec.copy()
                    up[i] += h
                    down[i] -= h
                    if vec is p:
                        fd = (pair_loss(up, q, params).total - pair_loss(down, q, params).total) / (2 * h)
                    else:
                        fd = (pair_loss(p, up, params).total - pair_loss(p, down, params).total) / (2 * h)
                    assert abs(grad[i] - fd) < 1e-6


class TestBatchLoss:
    def test_zero_weight_model_gives_pair_total(self):
        model = init_model(4, seed=0, hidden1=3, hidden2=2)
        zeroed = model.params()
        for arr in zeroed.values():
            arr[...] = 0.0
        from milrank.network import clone_with_params
        zero_model = clone_with_params(model, zeroed)
        params = LossParams(weight_decay=123.0)
        pair = ([0.2, 0.8], [0.3, 0.1])
        expected = pair_loss(*pair, params).total
        assert batch_loss([pair], params, zero_model) == pytest.approx(expected, abs=1e-15)

    def test_two_identical_pairs_average(self):
        model = init_model(4, seed=1, hidden1=3, hidden2=2)
        params = LossParams()
        pair = ([0.2, 0.8], [0.3, 0.1])
        single = batch_loss([pair], params, model)
        double = batch_loss([pair, pair], params, model)
        assert double == pytest.approx(single, rel=1e-15)

    def test_naive_summation_oracle(self):
        rng = np.random.default_rng(5)
        model = init_model(4, seed=2, hidden1=3, hidden2=2)
        params = LossParams(smoothness_weight=0.01, sparsity_weight=0.02, weight_decay=0.5)
        pairs = [(rng.uniform(0, 1, 6), rng.uniform(0, 1, 6)) for _ in range(9)]
        expected = 0.0
        for p, q in pairs:
            hinge = max(0.0, 1.0 - max(p) + max(q))
            smooth = 0.01 * sum((p[i] - p[i + 1]) ** 2 for i in range(5))
            sparse = 0.02 * sum(p)
            expected += hinge + smooth + sparse
        expected /= len(pairs)
        sq = sum(float((w ** 2).sum()) for w in (model.w1, model.w2, model.w3))
        expected += 0.5 * sq
        assert batch_loss(pairs, params, model) == pytest.approx(expected, abs=1e-12)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            batch_loss([], LossParams(), init_model(4, seed=0, hidden1=3, hidden2=2))


class TestParamsValidation:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossParams(smoothness_weight=-1e-9)

    def test_zero_margin_rejected(self):
        with pytest.raises(ValueError):
            LossParams(margin=0.0)

    def test_breakdown_total(self):
        b = BagLossBreakdown(hinge=0.5, smoothness=0.25, sparsity=0.125, argmax_pos=0, argmax_neg=1)
        assert b.total == 0.875

    def test_weight_decay_term_zero_for_zero_weights(self):
        model = init_model(4, seed=0, hidden1=3, hidden2=2)
        assert weight_decay_term(model, LossParams(weight_decay=0.0)) == 0.0
