import numpy as np
import pytest

from imgvirality.errors import ViralityError
from imgvirality.learn import (
    CVReport,
    LinearModel,
    TrainConfig,
    accuracy_csv,
    cross_validate,
    hinge_objective,
    make_cv_plan,
    pair_features,
    pair_matrix,
    predict,
    train_attribute_virality,
    train_linear,
    train_pairwise,
    train_relative_attribute,
)
from imgvirality.attributes import AttributeMatrix
from imgvirality.model import FeatureSet, FeatureVector, PairLabel


def blobs(seed, n=200, dim=2, gap=3.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = rng.normal(size=(n, dim)) + gap * y[:, None] / np.sqrt(dim)
    return X, y


class TestTrainLinear:
    def test_two_points(self):
        model = train_linear([[-1.0], [1.0]], [-1, 1])
        assert model.predict([[-1.0], [1.0]]).tolist() == [-1, 1]
        # boundary where the margin crosses zero, in raw units
        w = model.weights[0] / model.scale[0]
        boundary = model.mean[0] - model.bias / w
        assert -1.0 < boundary < 1.0

    @pytest.mark.parametrize("seed", range(3))
    def test_blobs(self, seed):
        X, y = blobs(seed)
        assert np.mean(train_linear(X, y, TrainConfig(seed=seed)).predict(X) == y) >= 0.99

    def test_irreducible(self):
        X = np.repeat(np.arange(20.0)[:, None], 2, axis=0)
        y = np.tile([1, -1], 20)
        acc = np.mean(train_linear(X, y).predict(X) == y)
        assert acc <= 0.5 + 1e-9

    def test_deterministic(self):
        X, y = blobs(1)
        a = train_linear(X, y, TrainConfig(seed=4))
        b = train_linear(X, y, TrainConfig(seed=4))
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    def test_objective_near_long_run(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(300, 6))
        y = np.where(X @ rng.normal(size=6) + 0.8 * rng.normal(size=300) > 0, 1, -1)
        short = train_linear(X, y).meta["objective"]
        long = train_linear(X, y, TrainConfig(epochs=2000)).meta["objective"]
        # 60 epochs land within a few percent of the 2000-epoch value
        assert short <= 1.10 * long
        assert short <= 1.0  # never worse than w = 0
        assert short == min([1.0] + train_linear(X, y).meta["history"])

    def test_objective_function(self):
        Xs = np.array([[1.0], [-1.0]])
        assert hinge_objective(np.zeros(1), 0.0, Xs, np.array([1, -1]), 0.1) == 1.0
        assert hinge_objective(np.ones(1), 0.0, Xs, np.array([1, -1]), 0.1) == pytest.approx(0.05)

    def test_errors(self):
        with pytest.raises(ViralityError) as err:
            train_linear([[1.0], [2.0]], [1, 1])
        assert err.value.code == "ONE_CLASS"
        with pytest.raises(ViralityError) as err:
            train_linear([[1.0], [2.0]], [1])
        assert err.value.code == "DIMENSION_MISMATCH"
        with pytest.raises(ViralityError) as err:
            train_linear([[1.0], [2.0]], [1, 0])
        assert err.value.code == "BAD_LABEL"

    def test_constant_feature(self):
        X = np.column_stack([np.r_[-2.0, -1.0, 1.0, 2.0], np.ones(4)])
        model = train_linear(X, [-1, -1, 1, 1])
        assert model.scale[1] == 1.0
        assert model.predict(X).tolist() == [-1, -1, 1, 1]


class TestModelIO:
    def test_round_trip(self):
        X, y = blobs(2, dim=3)
        model = train_linear(X, y)
        back = LinearModel.from_text(model.to_text())
        np.testing.assert_allclose(back.decision_function(X), model.decision_function(X), rtol=1e-9, atol=1e-9)

    @pytest.mark.parametrize("text", ["", "#dim=2 bias=0\n1 2\n0 0\n", "#dim=2 bias=0\n1\n0 0\n1 1\n"])
    def test_bad(self, text):
        with pytest.raises(ViralityError) as err:
            LinearModel.from_text(text)
        assert err.value.code == "BAD_MODEL"

    def test_predict_one(self):
        model = LinearModel(np.array([1.0]), 0.0, np.zeros(1), np.ones(1))
        assert predict(model, FeatureVector("a", [2.0])) == (1, 2.0)
        assert predict(model, [0.0]) == (1, 0.0)
        assert predict(model, [-3.0]) == (-1, -3.0)
        with pytest.raises(ViralityError):
            predict(model, [1.0, 2.0])


class TestPairwise:
    def test_pair_features(self):
        fs = FeatureSet.from_array(["a", "b"], [[1, 2], [0, 5]])
        np.testing.assert_array_equal(pair_features(fs, PairLabel("p", "a", "b", 1)), [1, -3])
        np.testing.assert_array_equal(pair_features(fs, PairLabel("p", "b", "a", -1)), [-1, 3])

    def test_identical_images_zero(self):
        fs = FeatureSet.from_array(["a", "b"], [[1, 2], [1, 2]])
        assert not pair_features(fs, PairLabel("p", "a", "b", 1)).any()

    def test_missing_features(self):
        fs = FeatureSet.from_array(["a"], [[1.0]])
        with pytest.raises(ViralityError) as err:
            pair_matrix(fs, [PairLabel("p", "a", "b", 1)])
        assert err.value.code == "MISSING_FEATURES"

    def test_no_bias_no_centring(self):
        X, y = blobs(3)
        model = train_pairwise(X + 5.0, y)
        assert model.bias == 0.0 and not model.mean.any()

    def test_swapped_pairs_flip(self):
        rng = np.random.default_rng(0)
        fs = FeatureSet.from_array([f"i{k}" for k in range(30)], rng.normal(size=(30, 4)))
        pairs = [PairLabel(f"p{k}", f"i{k}", f"i{k + 1}", 1 if k % 3 else -1) for k in range(29)]
        X, y = pair_matrix(fs, pairs)
        model = train_pairwise(X, y)
        Xs, _ = pair_matrix(fs, [p.swapped() for p in pairs])
        m, ms = model.decision_function(X), model.decision_function(Xs)
        assert np.array_equal(ms, -m)


class TestCVPlan:
    def test_loo(self):
        plan = make_cv_plan(10, 10)
        assert plan.sizes() == [1] * 10

    def test_uneven(self):
        assert sorted(make_cv_plan(103, 10).sizes()) == [10] * 7 + [11] * 3

    def test_reproducible(self):
        assert np.array_equal(make_cv_plan(50, 5, 3).folds, make_cv_plan(50, 5, 3).folds)
        assert not np.array_equal(make_cv_plan(50, 5, 3).folds, make_cv_plan(50, 5, 4).folds)

    def test_partition(self):
        plan = make_cv_plan(37, 4, 1)
        for f in range(4):
            assert set(plan.test_index(f)).isdisjoint(plan.train_index(f))
            assert len(plan.test_index(f)) + len(plan.train_index(f)) == 37

    @pytest.mark.parametrize("n, k", [(5, 1), (3, 4)])
    def test_bad(self, n, k):
        with pytest.raises(ViralityError) as err:
            make_cv_plan(n, k)
        assert err.value.code == "BAD_FOLDS"


class TestCrossValidate:
    def test_separable(self):
        X, y = blobs(5)
        report = cross_validate(X, y, make_cv_plan(len(y), 10), pairwise=False)
        assert report.accuracy >= 0.95
        assert report.n == len(y)
        assert sum(f.n for f in report.folds) == len(y)

    def test_rare_class_falls_back(self, caplog):
        X = np.arange(12.0)[:, None]
        y = np.array([-1] * 11 + [1])
        report = cross_validate(X, y, make_cv_plan(12, 4, 0))
        assert len(report.predictions) == 12
        assert "single class" in caplog.text

    def test_one_class(self):
        with pytest.raises(ViralityError) as err:
            cross_validate(np.zeros((4, 1)), [1, 1, 1, 1], make_cv_plan(4, 2))
        assert err.value.code == "ONE_CLASS"

    def test_plan_size_mismatch(self):
        with pytest.raises(ViralityError):
            cross_validate(np.zeros((4, 1)), [1, -1, 1, -1], make_cv_plan(5, 2))

    def test_csv(self):
        X, y = blobs(6, n=40)
        report = cross_validate(X, y, make_cv_plan(40, 4), task="demo")
        lines = accuracy_csv([report]).splitlines()
        assert lines[0] == "task,fold,n,accuracy"
        assert len(lines) == 1 + 4 + 1
        assert lines[-1].startswith("demo,all,40,")
        assert isinstance(report, CVReport)


def _planted_relative(n_pairs=200, seed=0, neutral=0.3):
    rng = np.random.default_rng(seed)
    n_images = 120
    ids = [f"i{k:03d}" for k in range(n_images)]
    X = rng.normal(size=(n_images, 5))
    w = np.array([1.5, -1.0, 0.5, 0.0, 0.0])
    fs = FeatureSet.from_array(ids, X)
    pairs, column = [], []
    for k in range(n_pairs):
        a, b = rng.choice(n_images, 2, replace=False)
        d = (X[a] - X[b]) @ w
        column.append(0 if abs(d) < neutral else (1 if d > 0 else -1))
        pairs.append(PairLabel(f"p{k:03d}", ids[a], ids[b], 1 if d + rng.normal() > 0 else -1))
    matrix = AttributeMatrix(
        tuple(p.pair_id for p in pairs), ("lin",), np.array(column)[:, None], [p.label for p in pairs]
    )
    return fs, pairs, matrix


class TestRelativeAttribute:
    def test_planted_linear(self):
        fs, pairs, matrix = _planted_relative()
        report = train_relative_attribute(fs, pairs, matrix, "lin", make_cv_plan(len(pairs), 10))
        n_nonzero, two_class = report.extra["two_class"]
        assert two_class >= 0.95
        assert n_nonzero == int((matrix.column("lin") != 0).sum())
        assert set(np.unique(report.predictions)) <= {-1, 0, 1}
        assert report.accuracy > 1 / 3

    def test_all_non_neutral(self):
        fs, pairs, matrix = _planted_relative(neutral=0.0)
        report = train_relative_attribute(fs, pairs, matrix, "lin", make_cv_plan(len(pairs), 5))
        assert 0 not in report.predictions

    def test_single_direction(self):
        fs, pairs, matrix = _planted_relative(n_pairs=30)
        flat = AttributeMatrix(matrix.pair_ids, ("up",), np.ones((30, 1)), matrix.labels)
        with pytest.raises(ViralityError) as err:
            train_relative_attribute(fs, pairs, flat, "up", make_cv_plan(30, 5))
        assert err.value.code == "ONE_CLASS"

    def test_unknown_pair(self):
        fs, pairs, matrix = _planted_relative(n_pairs=20)
        with pytest.raises(ViralityError):
            train_relative_attribute(fs, pairs[1:], matrix, "lin", make_cv_plan(20, 5))


class TestAttributeVirality:
    def test_informative_coordinate(self):
        rng = np.random.default_rng(0)
        labels = rng.choice([-1, 1], 200)
        A = np.column_stack([labels, rng.integers(-1, 2, 200), rng.integers(-1, 2, 200)])
        report = train_attribute_virality(A, labels, make_cv_plan(200, 10))
        assert report.accuracy >= 0.99

    def test_uninformative(self):
        rng = np.random.default_rng(1)
        labels = rng.choice([-1, 1], 400)
        A = rng.integers(-1, 2, size=(400, 5))
        report = train_attribute_virality(A, labels, make_cv_plan(400, 10))
        assert abs(report.accuracy - 0.5) <= 3 * np.sqrt(0.25 / 400)
