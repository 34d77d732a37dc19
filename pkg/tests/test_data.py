import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mreweight.data import (
    CsvSchema, NoisyDataset, gen_blobs, inject_label_noise, load_csv, mixup_arrays, mixup_batch,
    sample_mixup_lambda, train_test_split, write_csv,
)
from mreweight.errors import DataError, ParameterError, ParseError, SchemaError
from mreweight.losses import LossKind, LossModel, ModelKind
from mreweight.objective import Objective
from mreweight.optim import OptimConfig, gd_run
from mreweight.tensor import make_rng


def test_blobs_separable_with_linear_model():
    ds = gen_blobs(100, 2, 2, 10.0, make_rng(0))
    model = LossModel(ModelKind.SOFTMAX, LossKind.CROSS_ENTROPY, n_features=2, n_classes=2)
    tr = gd_run(OptimConfig(alpha=0.5, epochs=200), Objective(model, ds.inputs, ds.labels), np.zeros(model.n_params))
    assert np.mean(model.predict(tr.final_theta, ds.inputs) == ds.labels) >= 0.99


def test_blobs_errors_and_determinism():
    with pytest.raises(ParameterError):
        gen_blobs(0, 2, 2, 1.0, make_rng(0))
    a, b = gen_blobs(20, 3, 4, 2.0, make_rng(7)), gen_blobs(20, 3, 4, 2.0, make_rng(7))
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert np.bincount(a.labels).tolist() == [20, 20, 20]


def test_noise_zero_ratio():
    ds = gen_blobs(10, 3, 2, 2.0, make_rng(0))
    out = inject_label_noise(ds, 0.0, make_rng(1))
    np.testing.assert_array_equal(out.labels, ds.labels)
    assert not out.mask.any()


def test_noise_rate_binomial():
    ds = gen_blobs(2500, 4, 2, 2.0, make_rng(0))
    out = inject_label_noise(ds, 0.4, make_rng(1))
    sd = np.sqrt(10_000 * 0.4 * 0.6)
    assert abs(out.mask.sum() - 4000) <= 4 * sd
    np.testing.assert_array_equal(out.labels != out.clean_labels, out.mask)
    np.testing.assert_array_equal(out.inputs, ds.inputs)
    again = inject_label_noise(ds, 0.4, make_rng(1))
    np.testing.assert_array_equal(again.mask, out.mask)


def test_binary_noise_flips():
    ds = gen_blobs(5000, 2, 1, 1.0, make_rng(2))
    out = inject_label_noise(ds, 0.3, make_rng(3))
    np.testing.assert_array_equal(out.labels[out.mask], 1 - ds.labels[out.mask])
    assert abs(out.mask.mean() - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 10_000)


def test_noise_include_original_rate():
    ds = gen_blobs(2500, 4, 2, 2.0, make_rng(0))
    out = inject_label_noise(ds, 0.4, make_rng(1), include_original=True)
    assert abs(out.mask.mean() - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 10_000)


def test_noise_needs_two_classes():
    ds = gen_blobs(10, 1, 2, 1.0, make_rng(0))
    with pytest.raises(ParameterError):
        inject_label_noise(ds, 0.2, make_rng(0))


def test_dataset_validation():
    X = np.zeros((2, 1))
    with pytest.raises(DataError):
        NoisyDataset(X, [0, 1], [0, 0], [False, False], 2)
    with pytest.raises(SchemaError):
        NoisyDataset(X, [0, 2], [0, 2], [False, False], 2)
    ds = NoisyDataset.clean(X, [0, 1], 2)
    with pytest.raises(ValueError):
        ds.inputs[0, 0] = 1.0


def test_split_keeps_everything():
    ds = gen_blobs(25, 4, 3, 2.0, make_rng(0))
    train, test = train_test_split(ds, 0.2, make_rng(1))
    assert len(test) == 20 and len(train) == 80
    both = np.concatenate([train.inputs, test.inputs])
    assert sorted(map(tuple, both)) == sorted(map(tuple, ds.inputs))
    with pytest.raises(ParameterError):
        train_test_split(ds, 1.0, make_rng(0))


def test_mixup_forced_lambda():
    ds = gen_blobs(4, 2, 2, 3.0, make_rng(0))
    idx = np.arange(8)
    batch = mixup_batch(ds, idx, 1.0, make_rng(1), lam=1.0)
    np.testing.assert_array_equal(batch.inputs, ds.inputs)
    np.testing.assert_array_equal(batch.targets.argmax(axis=1), ds.labels)
    X = np.array([[0.0], [2.0]])
    y = np.array([0, 1])
    # first seed whose partner permutation swaps the two examples
    half = next(b for b in (mixup_arrays(X, y, [0, 1], 1.0, make_rng(s), 2, lam=0.5) for s in range(50))
                if b.perm[0] == 1)
    np.testing.assert_array_equal(half.targets, [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(half.inputs, [[1.0], [1.0]])


def test_mixup_lambda_uniform_for_alpha_one():
    rng = make_rng(0)
    lam = np.sort([sample_mixup_lambda(1.0, rng) for _ in range(100_000)])
    grid = np.arange(1, lam.size + 1) / lam.size
    ks = max(np.abs(grid - lam).max(), np.abs(grid - 1 / lam.size - lam).max())
    assert ks < 0.01


@given(st.integers(0, 10_000), st.floats(0.05, 5.0))
@settings(max_examples=50)
def test_mixup_targets_on_simplex(seed, alpha):
    rng = make_rng(seed)
    batch = mixup_arrays(rng.normal(size=(6, 2)), rng.integers(0, 3, 6), np.arange(6), alpha, rng, 3)
    assert np.all(batch.targets >= 0)
    np.testing.assert_allclose(batch.targets.sum(axis=1), 1.0, atol=1e-12)


def test_csv_round_trip(tmp_path):
    ds = inject_label_noise(gen_blobs(5, 3, 4, 2.0, make_rng(0)), 0.4, make_rng(1))
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.labels, ds.labels)
    truth = load_csv(path, CsvSchema(label="clean_label"))
    np.testing.assert_array_equal(truth.labels, ds.clean_labels)


def test_csv_small_and_malformed(tmp_path):
    good = tmp_path / "good.csv"
    good.write_text("f0,f1,label\n1,2,0\n3,4,1\n5,6,1\n")
    assert len(load_csv(good)) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("f0,f1,label\n1,2,0\n3,x,1\n")
    with pytest.raises(ParseError) as err:
        load_csv(bad)
    assert err.value.row == 3 and "row 3" in str(err.value)
    short = tmp_path / "short.csv"
    short.write_text("f0,f1,label\n1,2\n")
    with pytest.raises(ParseError):
        load_csv(short)
    out_of_range = tmp_path / "oor.csv"
    out_of_range.write_text("f0,label\n1,0\n2,5\n")
    with pytest.raises(SchemaError):
        load_csv(out_of_range, CsvSchema(n_classes=3))
    with pytest.raises(SchemaError):
        load_csv(good, CsvSchema(label="target"))
    with pytest.raises(DataError):
        load_csv(tmp_path / "missing.csv")
