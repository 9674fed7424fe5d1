import numpy as np
import pytest

from graf.dataset import (Dataset, align_labels, load_csv, load_features_csv,
                          save_csv)
from graf.errors import DataError


def test_basic_construction_and_totals():
    ds = Dataset(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]),
                 np.array([1, 2, 1]))
    assert ds.n_samples == 3
    assert ds.n_features == 2
    assert ds.n_classes == 2
    assert ds.class_totals.tolist() == [2, 1]


def test_labels_out_of_range_rejected():
    x = np.zeros((2, 1))
    with pytest.raises(DataError):
        Dataset(x, np.array([0, 1]))
    with pytest.raises(DataError):
        Dataset(x, np.array([1, 3]), n_classes=2)


def test_nonfinite_features_rejected():
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan], [1.0]]), np.array([1, 1]))
    with pytest.raises(DataError):
        Dataset(np.array([[np.inf], [1.0]]), np.array([1, 1]))


def test_subset_keeps_class_universe():
    ds = Dataset(np.arange(8, dtype=float).reshape(4, 2),
                 np.array([1, 2, 3, 1]))
    sub = ds.subset(np.array([0, 3]))
    assert sub.n_classes == 3
    assert sub.class_totals.tolist() == [2, 0, 0]
    assert sub.labels.tolist() == [1, 1]


def test_csv_round_trip(tmp_path):
    ds = Dataset(np.array([[0.1, -2.5], [1e-17, 3.0]]), np.array([1, 2]))
    path = tmp_path / "data.csv"
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_load_csv_first_appearance_mapping(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("f1,f2,label\n0,1,a\n2,3,b\n4,5,a\n")
    ds = load_csv(path)
    assert ds.n_classes == 2
    assert ds.labels.tolist() == [1, 2, 1]
    assert ds.class_names == ("a", "b")
    assert ds.feature_names == ("f1", "f2")


def test_load_csv_missing_cell_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f1,f2,label\n0,1,a\n2,,b\n")
    with pytest.raises(DataError) as err:
        load_csv(path)
    assert "row 2" in str(err.value) or "row 3" in str(err.value)
    assert "f2" in str(err.value)


def test_load_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f1,label\noops,a\n")
    with pytest.raises(DataError) as err:
        load_csv(path)
    assert "f1" in str(err.value)


def test_load_csv_label_column_default_and_missing(tmp_path):
    path = tmp_path / "nolabel.csv"
    path.write_text("f1,f2\n0,1\n")
    with pytest.raises(DataError) as err:
        load_csv(path)
    assert "label" in str(err.value)


def test_load_csv_custom_label_column(tmp_path):
    path = tmp_path / "custom.csv"
    path.write_text("y,f1\nspam,0.5\nham,1.5\n")
    ds = load_csv(path, label_column="y")
    assert ds.class_names == ("spam", "ham")
    assert ds.feature_names == ("f1",)


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DataError):
        load_csv(path)


def test_load_features_csv_drop_column(tmp_path):
    path = tmp_path / "pred.csv"
    path.write_text("f1,f2,label\n0,1,a\n2,3,b\n")
    x, names = load_features_csv(path, drop_column="label")
    assert x.shape == (2, 2)
    assert names == ("f1", "f2")
    plain = tmp_path / "plain.csv"
    plain.write_text("f1,f2\n0,1\n2,3\n")
    x2, names2 = load_features_csv(plain)
    assert x2.shape == (2, 2)
    assert names2 == ("f1", "f2")


def test_align_labels_remaps_by_display_value():
    ds = Dataset(np.zeros((3, 1)), np.array([1, 2, 1]),
                 class_names=("a", "b"))
    out = align_labels(ds, ("b", "a"))
    assert out.labels.tolist() == [2, 1, 2]
    assert out.class_names == ("b", "a")


def test_align_labels_rejects_unknown():
    ds = Dataset(np.zeros((1, 1)), np.array([1]), class_names=("zzz",))
    with pytest.raises(DataError):
        align_labels(ds, ("a", "b"))
