import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.decomposition import PCA

from qcoreset.dataset import (
    BinaryDataset,
    JacobiPCA,
    PcaTransform,
    RawDataset,
    fit_pca,
    jacobi_eigh,
    load_csv,
    pca_reduce,
    select_pair,
    split,
    split_indices,
    standardize,
    write_csv,
)
from qcoreset.exceptions import (
    ClassLookupError,
    DimensionError,
    InsufficientDataError,
    MissingFileError,
    NonIntegerLabelError,
    NonNumericFeatureError,
    ParseError,
    RaggedRowError,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- CSV ---------------------------------------------------------------------------


def test_load_small_file(tmp_path):
    p = _write(tmp_path, "f_0,f_1,label\n1.5,2,1\n-3,4e-1,2\n0,0,1\n")
    ds = load_csv(p)
    assert ds.n_samples == 3 and ds.n_features == 2
    np.testing.assert_array_equal(ds.features, [[1.5, 2.0], [-3.0, 0.4], [0.0, 0.0]])
    np.testing.assert_array_equal(ds.labels, [1, 2, 1])
    assert ds.class_names == {1: "1", 2: "2"}


@pytest.mark.parametrize(
    "body, exc, row",
    [
        ("1,2,1\n3,abc,2\n", NonNumericFeatureError, 3),
        ("1,2,1\n3,4\n", RaggedRowError, 3),
        ("1,2,1\n3,4,5,6\n", RaggedRowError, 3),
        ("1,2,1.5\n", NonIntegerLabelError, 2),
        ("1,2,x\n", NonIntegerLabelError, 2),
        ("1,nan,1\n", NonNumericFeatureError, 2),
    ],
)
def test_parse_errors_name_the_row(tmp_path, body, exc, row):
    p = _write(tmp_path, "f_0,f_1,label\n" + body)
    with pytest.raises(exc) as info:
        load_csv(p)
    assert info.value.row == row
    assert f"row {row}" in str(info.value)


def test_parse_errors_are_distinct_types():
    kinds = [NonNumericFeatureError, RaggedRowError, NonIntegerLabelError, MissingFileError]
    for a, b in itertools.combinations(kinds, 2):
        assert not issubclass(a, b) and not issubclass(b, a)
    assert all(issubclass(k, ParseError) for k in kinds)


def test_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_csv(tmp_path / "nope.csv")


def test_bad_header(tmp_path):
    with pytest.raises(ParseError) as info:
        load_csv(_write(tmp_path, "a,b,label\n1,2,1\n"))
    assert info.value.row == 1


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)),
              elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_is_bit_identical(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    labels = np.arange(X.shape[0]) % 3 + 1
    write_csv(path, X, labels)
    back = load_csv(path)
    np.testing.assert_array_equal(back.features, X)
    np.testing.assert_array_equal(back.labels, labels)


# -- standardisation ---------------------------------------------------------------


def test_standardize_two_points_hand_computed():
    # mean 2, sample sd sqrt(((1-2)^2 + (3-2)^2) / 1) = sqrt(2)
    ds = RawDataset(np.array([[1.0], [3.0]]), np.array([1, 2]))
    out, tf = standardize(ds)
    np.testing.assert_allclose(out.features[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
    np.testing.assert_allclose(tf.column_means, [2.0])
    np.testing.assert_allclose(tf.column_scales, [np.sqrt(2.0)])


def test_standardize_constant_column_maps_to_zero():
    ds = RawDataset(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]), np.array([1, 1, 2]))
    out, tf = standardize(ds)
    np.testing.assert_array_equal(out.features[:, 0], 0.0)
    assert tf.column_scales[0] == 1.0


def test_standardize_moments_and_idempotence():
    rng = np.random.default_rng(3)
    ds = RawDataset(rng.normal(5, 3, (40, 4)), np.ones(40, dtype=int))
    once, _ = standardize(ds)
    np.testing.assert_allclose(once.features.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(once.features.std(axis=0, ddof=1), 1.0, atol=1e-9)
    twice, _ = standardize(once)
    np.testing.assert_allclose(twice.features, once.features, atol=1e-9)


def test_standardize_needs_two_rows():
    with pytest.raises(InsufficientDataError):
        standardize(RawDataset(np.array([[1.0]]), np.array([1])))


# -- PCA ----------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_jacobi_matches_numpy_eigh(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    A = A + A.T
    vals, vecs = jacobi_eigh(A)
    ref = np.linalg.eigvalsh(A)
    np.testing.assert_allclose(np.sort(vals), ref, atol=1e-10 * max(1.0, np.abs(ref).max()))
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(A @ vecs, vecs * vals, atol=1e-9 * max(1.0, np.abs(ref).max()))


def test_x_axis_data_gives_first_unit_vector():
    X = np.array([[-2.0, 0.0], [-1.0, 0.0], [0.5, 0.0], [3.0, 0.0]])
    ds = RawDataset(X, np.array([1, 1, 2, 2]))
    _, tf = pca_reduce(ds, 1)
    np.testing.assert_allclose(tf.components, [[1.0, 0.0]], atol=1e-15)
    _, tf2 = pca_reduce(ds, 2)
    assert tf2.explained_variance[1] == pytest.approx(0.0, abs=1e-12)


def test_full_basis_preserves_distances():
    rng = np.random.default_rng(7)
    ds, _ = standardize(RawDataset(rng.normal(size=(25, 5)), np.ones(25, dtype=int)))
    out, _ = pca_reduce(ds, 5)
    d_in = np.linalg.norm(ds.features[:, None] - ds.features[None], axis=-1)
    d_out = np.linalg.norm(out.features[:, None] - out.features[None], axis=-1)
    np.testing.assert_allclose(d_out, d_in, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pca_orthonormal_sorted_and_trace(n, D, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, D)) @ rng.normal(size=(D, D))
    ds, _ = standardize(RawDataset(X, np.ones(n, dtype=int)))
    _, tf = pca_reduce(ds, D)
    C = tf.components
    np.testing.assert_allclose(C @ C.T, np.eye(D), atol=1e-9)
    assert np.all(np.diff(tf.explained_variance) <= 1e-12)
    total = np.var(ds.features, axis=0, ddof=1).sum()
    assert abs(tf.explained_variance.sum() - total) <= 1e-6
    for row in C:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        assert row[nz[0]] > 0


def test_pca_agrees_with_sklearn():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(50, 4)) @ np.diag([3.0, 2.0, 1.0, 0.5])
    ds = RawDataset(X, np.ones(50, dtype=int))
    std, _ = standardize(ds)
    out, tf = pca_reduce(std, 2)
    ref = PCA(n_components=2, svd_solver="full").fit(std.features)
    np.testing.assert_allclose(tf.explained_variance, ref.explained_variance_, rtol=1e-10)
    signs = np.sign(np.sum(tf.components * ref.components_, axis=1))
    np.testing.assert_allclose(tf.components, ref.components_ * signs[:, None], atol=1e-9)
    np.testing.assert_allclose(out.features, ref.transform(std.features) * signs, atol=1e-9)


def test_pca_too_many_components():
    ds = RawDataset(np.eye(3), np.ones(3, dtype=int))
    with pytest.raises(DimensionError):
        pca_reduce(ds, 4)


def test_fit_pca_transform_reproduces_reduced_data():
    rng = np.random.default_rng(2)
    ds = RawDataset(rng.normal(3, 2, (30, 5)), np.ones(30, dtype=int))
    out, tf = fit_pca(ds, 2)
    np.testing.assert_allclose(tf.transform(ds.features), out.features, atol=1e-12)
    back = PcaTransform.from_json(tf.to_json())
    assert set(tf.to_json()) == {"means", "scales", "components", "explained_variance"}
    np.testing.assert_array_equal(back.transform(ds.features), tf.transform(ds.features))


def test_jacobi_pca_estimator():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(20, 3))
    est = JacobiPCA(n_components=2)
    Z = est.fit_transform(X)
    ref, _ = fit_pca(RawDataset(X, np.ones(20, dtype=int)), 2)
    np.testing.assert_allclose(Z, ref.features, atol=1e-12)
    assert est.get_params() == {"n_components": 2, "standardize": True}


# -- pair selection and split -------------------------------------------------------


def _raw_146():
    rng = np.random.default_rng(0)
    labels = np.r_[np.full(46, 1), np.full(100, 2), np.full(10, 3)]
    return RawDataset(rng.normal(size=(156, 3)), rng.permutation(labels))


def test_select_pair_counts_and_orientation():
    raw = _raw_146()
    ab = select_pair(raw, 1, 2)
    assert ab.n_samples == 146
    np.testing.assert_array_equal(ab.labels, np.where(raw.labels[raw.labels != 3] == 1, 1, -1))
    ba = select_pair(raw, 2, 1)
    np.testing.assert_array_equal(ba.features, ab.features)
    np.testing.assert_array_equal(ba.labels, -ab.labels)
    assert ab.pair == (1, 2) and ba.pair == (2, 1)


def test_select_pair_unknown_class():
    with pytest.raises(ClassLookupError, match="9"):
        select_pair(_raw_146(), 1, 9)


def test_split_example_ten_points():
    ds = BinaryDataset(np.arange(10.0)[:, None], np.r_[np.ones(5), -np.ones(5)])
    train, test = split(ds, 0.2, seed=7)
    assert (train.n_samples, test.n_samples) == (8, 2)
    assert sorted(test.labels) == [-1, 1]
    again = split(ds, 0.2, seed=7)
    np.testing.assert_array_equal(again[1].features, test.features)


def test_split_half_of_four():
    ds = BinaryDataset(np.arange(4.0)[:, None], np.array([1.0, 1.0, -1.0, -1.0]))
    train, test = split(ds, 0.5, seed=0)
    assert train.n_samples == test.n_samples == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.floats(0.01, 0.99), st.integers(0, 1000))
def test_split_is_stratified_partition(n_pos, n_neg, frac, seed):
    labels = np.r_[np.ones(n_pos), -np.ones(n_neg)]
    train, test = split_indices(labels, frac, seed)
    assert np.intersect1d(train, test).size == 0
    np.testing.assert_array_equal(np.sort(np.r_[train, test]), np.arange(labels.size))
    for lab, count in ((1, n_pos), (-1, n_neg)):
        if count >= 2:
            expect = min(max(int(np.floor(frac * count + 0.5)), 1), count - 1)
            assert np.sum(labels[test] == lab) == expect
    assert train.size >= 1 and test.size >= 1
