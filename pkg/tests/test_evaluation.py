import io
from collections import Counter

import numpy as np
import pytest

from mixed_gfmm import DataError, HyperParams, NumericError, persist
from mixed_gfmm.evaluation import (
    ConfusionMatrix,
    CvPlan,
    ParamGrid,
    cba,
    cba_score,
    estimate_alpha_v1,
    estimate_alpha_v2,
    fixed_alpha,
    run_alpha_estimation,
    run_cv,
    stratified_repeated_kfold,
    train,
    tune_grid,
)

from conftest import make_schema, random_stream

SCHEMA_TEXT = "id,ignore\nsize,continuous\ncolour,categorical\nshape,categorical\nlabel,class\n"


def toy_dataset(rng, rows=60, noise=0.0):
    """Two classes: small red circles and large blue squares, plus optional label noise."""
    lines = ["id,size,colour,shape,label"]
    for i in range(rows):
        big = i % 2
        size = (50 + 40 * rng.random()) if big else (10 * rng.random())
        colour = "blue" if big else "red"
        shape = "square" if big else "circle"
        label = ("B" if big else "A") if rng.random() >= noise else ("A" if big else "B")
        lines.append(f"{i},{size:.4f},{colour},{shape},{label}")
    schema = persist.parse_schema(SCHEMA_TEXT)
    return persist.read_dataset(io.StringIO("\n".join(lines) + "\n"), schema)


class TestCba:
    def test_perfect(self):
        assert cba(np.diag([3, 4, 5])) == 1.0

    def test_example(self):
        assert cba(np.array([[3, 1], [2, 4]])) == pytest.approx(0.633333, abs=1e-6)

    def test_all_wrong(self):
        assert cba(np.array([[0, 3], [4, 0]])) == 0.0

    def test_absent_class(self):
        with pytest.raises(DataError, match="class absent from evaluation set"):
            cba(np.array([[3, 1], [0, 0]]))
        assert cba(np.array([[3, 1], [0, 0]]), skip_absent=True) == pytest.approx(3 / 4)

    def test_from_labels(self):
        cm = ConfusionMatrix.from_labels(list("AAAABBBBBB"), list("AAABAABBBB"))
        assert cm.counts.tolist() == [[3, 1], [2, 4]] and cm.total == 10
        assert cba_score(list("AAAABBBBBB"), list("AAABAABBBB")) == pytest.approx(0.633333, abs=1e-6)

    def test_range_and_diagonal(self, rng):
        for _ in range(300):
            k = int(rng.integers(2, 5))
            m = rng.integers(0, 5, size=(k, k))
            m[np.arange(k), np.arange(k)] += 1
            score = cba(m)
            assert 0.0 <= score <= 1.0
            off = m.sum() - np.trace(m)
            assert (score == 1.0) == (off == 0)


class TestSplits:
    def test_balanced_pairs(self):
        splits = stratified_repeated_kfold(list("AAAABBBB"), CvPlan(repeats=1, folds=4, seed=3))
        for _, test in splits:
            assert sorted("AAAABBBB"[i] for i in test) == ["A", "B"]

    def test_deterministic(self):
        labels = list("AAAAABBBBBBBCCC")
        a = stratified_repeated_kfold(labels, CvPlan(3, 4, 9))
        b = stratified_repeated_kfold(labels, CvPlan(3, 4, 9))
        assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))

    def test_rare_class(self):
        labels = list("AAAAAAAA") + list("CCC")
        splits = stratified_repeated_kfold(labels, CvPlan(repeats=1, folds=4))
        per_fold = [sum(labels[i] == "C" for i in test) for _, test in splits]
        assert sorted(per_fold) == [0, 1, 1, 1]

    def test_partition_and_balance(self, rng):
        labels = rng.choice(list("ABCDE"), size=97, p=[0.5, 0.2, 0.15, 0.1, 0.05]).tolist()
        plan = CvPlan(repeats=3, folds=4, seed=1)
        splits = stratified_repeated_kfold(labels, plan)
        assert len(splits) == 12
        for rep in range(3):
            block = splits[rep * 4 : rep * 4 + 4]
            tests = np.concatenate([t for _, t in block])
            assert sorted(tests.tolist()) == list(range(97))
            for train_idx, test in block:
                assert np.intersect1d(train_idx, test).size == 0
                assert len(train_idx) + len(test) == 97
            for cls in "ABCDE":
                counts = [sum(labels[i] == cls for i in t) for _, t in block]
                assert max(counts) - min(counts) <= 1

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            CvPlan(repeats=0)
        with pytest.raises(ValueError):
            CvPlan(folds=1)


class TestAlphaRules:
    def test_fixed(self):
        assert fixed_alpha(6, 8) == pytest.approx(0.428571, abs=1e-6)
        assert fixed_alpha(3, 0) == 1.0
        assert fixed_alpha(0, 3) == 0.0

    def test_v1(self):
        a = estimate_alpha_v1((0.8, 0.7, 0.75), (0.5, 0.6, 0.55), 6, 8)
        assert a == pytest.approx(13.5 / 26.7, abs=1e-12)
        assert a == pytest.approx(0.505618, abs=1e-6)
        assert estimate_alpha_v1((0.6,) * 3, (0.6,) * 3, 4, 4) == 0.5
        assert estimate_alpha_v1((0.6,) * 3, (0.0,) * 3, 4, 4) == 1.0

    def test_v1_equal_scores_give_fixed_rule(self, rng):
        for _ in range(50):
            s = rng.random(3) + 0.01
            n, r = (int(k) for k in rng.integers(1, 20, size=2))
            assert estimate_alpha_v1(s, s, n, r) == pytest.approx(fixed_alpha(n, r), abs=1e-12)

    def test_v2(self):
        assert estimate_alpha_v2((0.8, 0.7, 0.75), (0.5, 0.6, 0.55)) == pytest.approx(0.576923, abs=1e-6)
        assert estimate_alpha_v2((0.6,) * 3, (0.6,) * 3) == 0.5
        assert estimate_alpha_v2((0.0,) * 3, (0.6,) * 3) == 0.0

    @pytest.mark.parametrize("fn", [lambda: estimate_alpha_v1((0,) * 3, (0,) * 3, 2, 2), lambda: estimate_alpha_v2((0,) * 3, (0,) * 3)])
    def test_zero(self, fn):
        with pytest.raises(NumericError):
            fn()


class TestAlphaEstimation:
    def test_deterministic_and_in_range(self, rng):
        data = toy_dataset(rng, 60, noise=0.1)
        pats = persist.fit_scaler(data).apply(data)
        a = run_alpha_estimation(pats, data.schema, HyperParams(), "v1", seed=4)
        b = run_alpha_estimation(pats, data.schema, HyperParams(), "v1", seed=4)
        assert a == b and 0.0 <= a <= 1.0
        assert 0.0 <= run_alpha_estimation(pats, data.schema, HyperParams(), "v2", seed=4) <= 1.0

    def test_masked_schemas(self):
        schema = make_schema(2, 3)
        assert (schema.only("continuous").n, schema.only("continuous").r) == (2, 0)
        assert (schema.only("categorical").n, schema.only("categorical").r) == (0, 3)

    def test_pure_schema_rejected(self, rng):
        pats = random_stream(rng, 2, 0, 20)
        with pytest.raises(DataError, match="estimation undefined"):
            run_alpha_estimation(pats, make_schema(2, 0), HyperParams(), "v1")


class TestTuneGrid:
    def test_singleton(self, rng):
        pats = random_stream(rng, 1, 1, 40, n_classes=2)
        best = tune_grid(pats, make_schema(1, 1), ParamGrid((0.3,), (0.5,), (0.2,)))
        assert (best.theta, best.delta, best.alpha) == (0.3, 0.5, 0.2)

    def test_deterministic(self, rng):
        pats = random_stream(rng, 1, 1, 40, n_classes=2)
        grid = ParamGrid((0.1, 0.5), (0.1, 1.0), (0.0, 0.5, 1.0))
        assert tune_grid(pats, make_schema(1, 1), grid, seed=2) == tune_grid(pats, make_schema(1, 1), grid, seed=2)

    def test_dominant_choice(self, rng):
        # classes are told apart only by the categorical attribute; alpha=1 ignores it
        pats = [p for p in random_stream(rng, 1, 1, 60, n_classes=2, n_values=1)]
        pats = [type(p)(p.lower, p.upper, (p.label,), p.label) for p in pats]
        best = tune_grid(pats, make_schema(1, 1), ParamGrid((0.5,), (1.0,), (1.0, 0.5)))
        assert best.alpha == 0.5

    def test_ties_prefer_reference_alpha(self, rng):
        pats = [p for p in random_stream(rng, 1, 1, 40, n_classes=1)]
        # one class: every setting scores 1; alpha nearest n/(n+r)=0.5 wins
        best = tune_grid(pats, make_schema(1, 1), ParamGrid((0.2, 0.1), (0.3, 0.1), (0.0, 0.6, 0.5)))
        assert (best.theta, best.delta, best.alpha) == (0.1, 0.1, 0.5)


class TestRunCv:
    def test_separable_scores_one(self, rng):
        data = toy_dataset(rng, 40)
        res = run_cv(data, HyperParams(theta=1.0, delta=1.0), CvPlan(repeats=2, folds=4, seed=0))
        assert res.mean == 1.0 and len(res.fold_cba) == 8

    def test_deterministic(self, rng):
        data = toy_dataset(rng, 60, noise=0.2)
        plan = CvPlan(repeats=2, folds=4, seed=5)
        a = run_cv(data, HyperParams(), plan)
        b = run_cv(data, HyperParams(), plan)
        assert a.fold_cba == b.fold_cba and a.alphas == b.alphas

    def test_parallel_matches_serial(self, rng):
        data = toy_dataset(rng, 60, noise=0.2)
        plan = CvPlan(repeats=1, folds=4, seed=5)
        assert run_cv(data, HyperParams(), plan, jobs=2).fold_cba == run_cv(data, HyperParams(), plan).fold_cba

    @pytest.mark.parametrize("mode", ["auto", "est-v1", "est-v2", "tune", "0.25"])
    def test_alpha_modes(self, rng, mode):
        data = toy_dataset(rng, 40, noise=0.1)
        res = run_cv(data, HyperParams(theta=0.5), CvPlan(repeats=1, folds=2, seed=1), alpha=mode)
        assert all(0.0 <= a <= 1.0 for a in res.alphas)
        if mode == "auto":
            assert res.alphas == [pytest.approx(1 / 3)] * 2
        if mode == "0.25":
            assert res.alphas == [0.25, 0.25]

    def test_scaler_sees_training_rows_only(self, rng, monkeypatch):
        data = toy_dataset(rng, 40)
        fitted = []
        real = persist.fit_scaler

        def spy(raw, schema=None):
            fitted.append(sorted(int(row[0]) for row in raw.rows))
            return real(raw, schema)

        monkeypatch.setattr(persist, "fit_scaler", spy)
        plan = CvPlan(repeats=2, folds=4, seed=2)
        run_cv(data, HyperParams(), plan)
        splits = stratified_repeated_kfold(data.labels, plan)
        assert len(fitted) == len(splits)
        for ids, (train_idx, test_idx) in zip(fitted, splits):
            assert ids == train_idx.tolist()
            assert not set(ids) & set(test_idx.tolist())

    def test_training_follows_file_order(self, rng, monkeypatch):
        from mixed_gfmm import evaluation

        data = toy_dataset(rng, 20)
        seen = []
        real = evaluation.train
        monkeypatch.setattr(evaluation, "train", lambda p, s, q, **kw: seen.append(p) or real(p, s, q, **kw))
        plan = CvPlan(repeats=1, folds=2)
        run_cv(data, HyperParams(), plan)
        for pats, (train_idx, _) in zip(seen, stratified_repeated_kfold(data.labels, plan)):
            sub = data.subset(train_idx)
            expected = persist.fit_scaler(sub).apply(sub)
            assert pats == expected

        seen.clear()
        run_cv(data, HyperParams(), plan, shuffle_seed=3)
        first = data.subset(stratified_repeated_kfold(data.labels, plan)[0][0])
        in_order = persist.fit_scaler(first).apply(first)
        assert seen[0] != in_order and sorted(map(hash, seen[0])) == sorted(map(hash, in_order))


def test_train_counts(rng):
    pats = random_stream(rng, 2, 1, 50)
    model = train(pats, make_schema(2, 1), HyperParams())
    assert int(model.n_samples.sum()) == 50
    assert Counter(b.label for b in model.boxes).keys() <= {"k0", "k1", "k2"}
