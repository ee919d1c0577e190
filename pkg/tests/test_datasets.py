import math

import numpy as np
import pytest

from topklearn.datasets import (
    CIRCLE_SEGMENT_WEIGHTS,
    CircleSpec,
    Dataset,
    SplitSpec,
    circle_bayes_topk_error,
    generate_circle,
    load_libsvm,
    save_libsvm,
    split,
)


class TestLibsvm:
    def test_basic_parse(self, tmp_path):
        f = tmp_path / "toy.txt"
        f.write_text("1 1:0.5 3:2.0\n2 2:1.0\n")
        data = load_libsvm(f)
        assert (data.d, data.n, data.m) == (3, 2, 2)
        np.testing.assert_array_equal(data.features[:, 0], [0.5, 0, 2.0])
        np.testing.assert_array_equal(data.features[:, 1], [0, 1.0, 0])

    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.txt"
        f.write_text("")
        with pytest.raises(ValueError, match="no examples"):
            load_libsvm(f)

    def test_malformed_token_reports_line(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("1 1:0.5\n2 oops\n")
        with pytest.raises(ValueError, match=":2:"):
            load_libsvm(f)

    def test_bad_label(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("0 1:0.5\n")
        with pytest.raises(ValueError, match="labels must be >= 1"):
            load_libsvm(f)
        f.write_text("1.5 1:0.5\n")
        with pytest.raises(ValueError, match="malformed label"):
            load_libsvm(f)

    def test_nonincreasing_indices(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("1 2:0.5 2:1.0\n")
        with pytest.raises(ValueError, match="strictly increasing"):
            load_libsvm(f)

    def test_num_features_override(self, tmp_path):
        f = tmp_path / "toy.txt"
        f.write_text("1 1:1.0\n2 1:2.0\n")
        assert load_libsvm(f, num_features=5).d == 5
        with pytest.raises(ValueError):
            load_libsvm(f, num_features=0)

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(4, 20)) * np.exp(rng.uniform(-9, 9, (4, 20)))
        feats[rng.uniform(size=feats.shape) < 0.3] = 0.0
        feats[:, 0] = [1e-300, 1.0, -1.0, 0.1]  # keep column 0 nonempty
        data = Dataset(feats, rng.integers(1, 4, 20), 3)
        path = tmp_path / "rt.txt"
        save_libsvm(data, path)
        back = load_libsvm(path, num_features=4)
        np.testing.assert_array_equal(back.features, data.features)
        np.testing.assert_array_equal(back.labels, data.labels)


class TestDatasetInvariants:
    def test_validation(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 2)), np.array([1, 3]), 2)  # label > m
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 2)), np.array([0, 1]), 2)
        with pytest.raises(ValueError):
            Dataset(np.full((2, 2), np.nan), np.array([1, 2]), 2)
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 0)), np.array([]), 2)

    def test_immutable(self):
        data = Dataset(np.ones((2, 2)), np.array([1, 2]), 2)
        with pytest.raises(ValueError):
            data.features[0, 0] = 5.0


class TestCircle:
    def test_points_on_unit_circle(self):
        train, val, test = generate_circle(CircleSpec(100, 50, 200, seed=3))
        for ds in (train, val, test):
            norms = np.linalg.norm(ds.features, axis=0)
            assert np.max(np.abs(norms - 1.0)) <= 1e-12

    def test_labels_respect_segment_support(self):
        # recover the segment from the angle; the label must have
        # positive weight there; segment 1 is deterministic class 2
        train, _, _ = generate_circle(CircleSpec(5000, 1, 1, seed=4))
        angles = np.arctan2(train.features[1], train.features[0])
        u = (angles % (2 * math.pi)) / (2 * math.pi) * 7.0
        seg = np.searchsorted([1.0, 2.0, 3.0, 6.0], u, side="right")
        for s in range(5):
            mask = seg == s
            labels = train.labels[mask]
            support = np.nonzero(CIRCLE_SEGMENT_WEIGHTS[s])[0] + 1
            assert np.all(np.isin(labels, support))
        assert np.all(train.labels[seg == 0] == 2)

    def test_seed_reproducibility(self):
        a = generate_circle(CircleSpec(64, 64, 64, seed=9))
        b = generate_circle(CircleSpec(64, 64, 64, seed=9))
        c = generate_circle(CircleSpec(64, 64, 64, seed=10))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features, y.features)
            np.testing.assert_array_equal(x.labels, y.labels)
        assert not np.array_equal(a[0].features, c[0].features)

    def test_segment_frequencies_chi_squared(self):
        train, _, _ = generate_circle(CircleSpec(100000, 1, 1, seed=11))
        angles = np.arctan2(train.features[1], train.features[0])
        u = (angles % (2 * math.pi)) / (2 * math.pi) * 7.0
        seg = np.searchsorted([1.0, 2.0, 3.0, 6.0], u, side="right")
        for s in range(5):
            mask = seg == s
            count = mask.sum()
            weights = CIRCLE_SEGMENT_WEIGHTS[s]
            support = np.nonzero(weights)[0]
            if support.size == 1:
                continue
            observed = np.array([(train.labels[mask] == c + 1).sum()
                                 for c in support])
            expected = weights[support] * count
            stat = float(((observed - expected) ** 2 / expected).sum())
            # df <= 2; 16.27 is the 99.97% quantile for df = 2
            assert stat <= 16.27

    def test_empirical_bayes_error_matches_closed_form(self):
        # the Bayes rule on this data picks the top-weight classes of
        # the point's segment; its empirical top-2 error must match the
        # segment-integrated closed form
        train, _, _ = generate_circle(CircleSpec(10 ** 6, 1, 1, seed=12))
        angles = np.arctan2(train.features[1], train.features[0])
        u = (angles % (2 * math.pi)) / (2 * math.pi) * 7.0
        seg = np.searchsorted([1.0, 2.0, 3.0, 6.0], u, side="right")
        top2 = np.argsort(-CIRCLE_SEGMENT_WEIGHTS, axis=1)[:, :2] + 1
        hit = (train.labels == top2[seg, 0]) | (train.labels == top2[seg, 1])
        empirical = 1.0 - hit.mean()
        closed = circle_bayes_topk_error(2)
        assert closed == pytest.approx(0.1 / 7.0, abs=1e-12)
        assert empirical == pytest.approx(closed, abs=5e-3)

    def test_bayes_top1(self):
        assert circle_bayes_topk_error(1) == pytest.approx(1.4 / 7.0, abs=1e-12)
        assert circle_bayes_topk_error(3) == pytest.approx(0.0, abs=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CircleSpec(0, 1, 1)


class TestSplit:
    def test_balanced_stratified(self):
        data = Dataset(np.arange(20, dtype=float).reshape(2, 10),
                       np.array([1, 2] * 5), 2)
        tr, te = split(data, SplitSpec(0.5, seed=0, stratified=True))
        assert tr.n == te.n == 5
        assert np.bincount(tr.labels)[1:].tolist() == [3, 2] or \
            np.bincount(tr.labels)[1:].tolist() == [2, 3]

    def test_fraction_one_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        data = Dataset(rng.normal(size=(3, 40)), rng.integers(1, 4, 40), 3)
        s = SplitSpec(0.6, seed=7, stratified=True)
        a1, b1 = split(data, s)
        a2, b2 = split(data, s)
        np.testing.assert_array_equal(a1.features, a2.features)
        np.testing.assert_array_equal(b1.labels, b2.labels)

    def test_disjoint_exhaustive(self):
        rng = np.random.default_rng(6)
        feats = rng.normal(size=(1, 30))
        data = Dataset(feats, rng.integers(1, 4, 30), 3)
        for strat in (True, False):
            tr, te = split(data, SplitSpec(0.37, seed=1, stratified=strat))
            merged = np.sort(np.concatenate((tr.features[0], te.features[0])))
            np.testing.assert_array_equal(merged, np.sort(feats[0]))
            assert tr.n + te.n == 30

    def test_class_starvation_raises(self):
        data = Dataset(np.ones((1, 12)), np.array([1] * 10 + [2] * 2), 2)
        with pytest.raises(ValueError, match="class 2"):
            split(data, SplitSpec(0.1, seed=0, stratified=True))
