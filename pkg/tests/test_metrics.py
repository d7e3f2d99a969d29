import numpy as np
import pytest

from milrank.exceptions import DimensionMismatchError, FormatError, MetricError
from milrank.features import Bag, FeatureMatrix, l2_normalize_rows, make_bag, partition_segments
from milrank.metrics import (
    RocCurve,
    ScoreTimeline,
    TemporalAnnotation,
    expand_scores,
    false_alarm_rate,
    load_annotations,
    roc_auc,
    score_video,
    write_roc_csv,
)
from milrank.network import MlpModel, forward, init_model


def two_segment_bag(ranges=((0, 5), (5, 10))):
    return Bag("v", 0, np.zeros((2, 3)), tuple(ranges))


def timeline(video_id, scores):
    return ScoreTimeline(video_id, np.asarray(scores, dtype=np.float64))


def annotation(video_id, n_frames, *intervals):
    return TemporalAnnotation(video_id, n_frames, tuple(intervals))


def pair_count_auc(labels, scores):
    """Brute-force P(score_pos > score_neg) + half credit for ties."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[labels][:, None]
    neg = scores[~labels][None, :]
    wins = (pos > neg).sum()
    ties = (pos == neg).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size / 1)  # sizes broadcast


def pooled_auc_oracle(timelines, annotations):
    labels = np.concatenate([a.frame_labels() for a in annotations])
    scores = np.concatenate([t.frame_scores for t in timelines])
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    pos = scores[labels]
    neg = scores[~labels]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (n_pos * n_neg)


class TestExpandScores:
    def test_two_segment_example(self):
        tl = expand_scores(two_segment_bag(), [0.1, 0.9])
        assert np.array_equal(tl.frame_scores[:5], np.full(5, 0.1))
        assert np.array_equal(tl.frame_scores[5:], np.full(5, 0.9))

    def test_constant_scores(self):
        tl = expand_scores(two_segment_bag(), [0.4, 0.4])
        assert np.array_equal(tl.frame_scores, np.full(10, 0.4))

    def test_random_bag_linear_scan_oracle(self):
        rng = np.random.default_rng(0)
        f = FeatureMatrix("v", rng.standard_normal((13, 3)), 77)
        bag = make_bag(f, 1, 8)
        scores = rng.uniform(0, 1, 8)
        tl = expand_scores(bag, scores)
        for frame in range(77):
            for (start, end), s in zip(bag.segment_frame_ranges, scores):
                if start <= frame < end:
                    assert tl.frame_scores[frame] == s
                    break
            else:
                pytest.fail(f"frame {frame} not covered")

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            expand_scores(two_segment_bag(), [0.1, 0.2, 0.3])


class TestRocAuc:
    def test_perfect_ranking(self):
        tls = [timeline("a", [1.0, 1.0, 0.0, 0.0])]
        anns = [annotation("a", 4, (0, 2))]
        assert roc_auc(tls, anns).auc == 1.0

    def test_degenerate_constant_scores(self):
        tls = [timeline("a", [0.5, 0.5, 0.5, 0.5])]
        anns = [annotation("a", 4, (0, 2))]
        assert roc_auc(tls, anns).auc == 0.5

    def test_pair_counting_oracle_random_pools(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            n = int(rng.integers(10, 400))
            n_anom = int(rng.integers(1, n))
            scores = np.round(rng.uniform(0, 1, n), 2)  # rounding forces ties
            tls = [timeline("a", scores)]
            anns = [annotation("a", n, (0, n_anom))]
            got = roc_auc(tls, anns).auc
            want = pooled_auc_oracle(tls, anns)
            assert abs(got - want) < 1e-9

    def test_multi_video_pooling(self):
        tls = [timeline("a", [0.9, 0.1]), timeline("b", [0.8, 0.2, 0.3])]
        anns = [annotation("a", 2, (0, 1)), annotation("b", 3, (0, 1))]
        got = roc_auc(tls, anns).auc
        assert abs(got - pooled_auc_oracle(tls, anns)) < 1e-12

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        scores = rng.uniform(0, 1, 200)
        tls_a = [timeline("a", scores)]
        tls_b = [timeline("a", scores ** 3)]
        anns = [annotation("a", 200, (50, 120))]
        assert abs(roc_auc(tls_a, anns).auc - roc_auc(tls_b, anns).auc) < 1e-12

    def test_label_reversal_complements_auc(self):
        rng = np.random.default_rng(3)
        scores = rng.uniform(0, 1, 100)
        tls = [timeline("a", scores)]
        forward_auc = roc_auc(tls, [annotation("a", 100, (30, 70))]).auc
        reversed_auc = roc_auc(tls, [annotation("a", 100, (0, 30), (70, 100))]).auc
        assert abs(forward_auc - (1.0 - reversed_auc)) < 1e-12

    def test_curve_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(4)
        tls = [timeline("a", np.round(rng.uniform(0, 1, 60), 1))]
        anns = [annotation("a", 60, (10, 35))]
        curve = roc_auc(tls, anns)
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in curve.points]
        tprs = [p[1] for p in curve.points]
        assert all(a <= b for a, b in zip(fprs, fprs[1:]))
        assert all(a <= b for a, b in zip(tprs, tprs[1:]))
        assert curve.thresholds[0] == float("inf")

    def test_single_class_pool_rejected(self):
        with pytest.raises(MetricError):
            roc_auc([timeline("a", [0.1, 0.2])], [annotation("a", 2)])
        with pytest.raises(MetricError):
            roc_auc([timeline("a", [0.1, 0.2])], [annotation("a", 2, (0, 2))])

    def test_missing_annotation_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([timeline("a", [0.1, 0.2])], [annotation("b", 2, (0, 1))])

    def test_frame_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([timeline("a", [0.1, 0.2])], [annotation("a", 3, (0, 1))])


class TestFalseAlarmRate:
    def test_all_zero_scores(self):
        assert false_alarm_rate([timeline("a", np.zeros(10))]) == 0.0

    def test_all_one_scores(self):
        assert false_alarm_rate([timeline("a", np.ones(10))]) == 1.0

    def test_uniform_scores_near_half(self):
        rng = np.random.default_rng(5)
        tls = [timeline("a", rng.uniform(0, 1, 10_000))]
        assert abs(false_alarm_rate(tls, 0.5) - 0.5) < 0.02

    def test_threshold_inclusive(self):
        tls = [timeline("a", [0.5, 0.4999, 0.5001])]
        assert false_alarm_rate(tls, 0.5) == pytest.approx(2 / 3)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(6)
        tls = [timeline("a", rng.uniform(0, 1, 500))]
        rates = [false_alarm_rate(tls, t) for t in np.linspace(0, 1, 21)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_empty_pool_rejected(self):
        with pytest.raises(MetricError):
            false_alarm_rate([])


class TestScoreVideo:
    def test_zero_model_scores_half(self):
        model = MlpModel(w1=np.zeros((4, 3)), b1=np.zeros(4), w2=np.zeros((2, 4)),
                         b2=np.zeros(2), w3=np.zeros((1, 2)), b3=np.zeros(1))
        f = FeatureMatrix("v", np.random.default_rng(7).standard_normal((6, 3)), 96)
        scores, tl = score_video(model, f, 4)
        assert np.array_equal(scores, np.full(4, 0.5))
        assert np.array_equal(tl.frame_scores, np.full(96, 0.5))

    def test_deterministic(self):
        model = init_model(3, seed=8, hidden1=4, hidden2=2)
        f = FeatureMatrix("v", np.random.default_rng(8).standard_normal((6, 3)), 96)
        a, _ = score_video(model, f, 4)
        b, _ = score_video(model, f, 4)
        assert np.array_equal(a, b)

    def test_matches_manual_chain(self):
        model = init_model(3, seed=9, hidden1=4, hidden2=2)
        f = FeatureMatrix("v", np.random.default_rng(9).standard_normal((6, 3)), 96)
        scores, tl = score_video(model, f, 4)
        segments, _ = partition_segments(l2_normalize_rows(f), 4)
        manual, _ = forward(model, segments, mode="eval")
        bag = make_bag(f, 0, 4)
        assert np.array_equal(scores, manual)
        assert np.array_equal(tl.frame_scores, expand_scores(bag, manual).frame_scores)

    def test_dim_mismatch(self):
        model = init_model(5, seed=10, hidden1=4, hidden2=2)
        f = FeatureMatrix("v", np.ones((4, 3)), 64)
        with pytest.raises(DimensionMismatchError):
            score_video(model, f, 4)


class TestAnnotationsFile:
    def test_parse_with_sentinels(self, tmp_path):
        path = tmp_path / "ann.txt"
        path.write_text(
            "vid_a 100 10 20 -1 -1\n"
            "vid_b 50 -1 -1 -1 -1\n"
            "vid_c 80 5 10 40 60\n")
        anns = load_annotations(path)
        assert anns["vid_a"].intervals == ((10, 20),)
        assert anns["vid_b"].intervals == ()
        assert anns["vid_c"].intervals == ((5, 10), (40, 60))

    def test_odd_token_count(self, tmp_path):
        path = tmp_path / "ann.txt"
        path.write_text("vid 100 10\n")
        with pytest.raises(FormatError, match="line 1"):
            load_annotations(path)

    def test_interval_out_of_range(self, tmp_path):
        path = tmp_path / "ann.txt"
        path.write_text("vid 100 90 110\n")
        with pytest.raises(FormatError, match="line 1"):
            load_annotations(path)

    def test_overlapping_intervals(self, tmp_path):
        path = tmp_path / "ann.txt"
        path.write_text("vid 100 10 50 40 60\n")
        with pytest.raises(FormatError):
            load_annotations(path)

    def test_duplicate_video(self, tmp_path):
        path = tmp_path / "ann.txt"
        path.write_text("vid 100 -1 -1\nvid 100 -1 -1\n")
        with pytest.raises(FormatError, match="line 2"):
            load_annotations(path)


class TestRocCsv:
    def test_csv_has_threshold_rows_and_auc_line(self, tmp_path):
        curve = RocCurve(thresholds=(float("inf"), 0.9, 0.1),
                         points=((0.0, 0.0), (0.0, 0.5), (1.0, 1.0)), auc=0.75)
        path = tmp_path / "roc.csv"
        write_roc_csv(curve, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "threshold,fpr,tpr"
        assert lines[1] == "inf,0.0,0.0"
        assert lines[-1] == "AUC,0.75"
