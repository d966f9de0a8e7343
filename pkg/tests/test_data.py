import numpy as np
import pytest
from hypothesis import given, strategies as st

from labelaudit.data import (
    DataFormatError,
    MultiLabelDataset,
    ProbMatrix,
    check_ids_aligned,
    load_dataset,
    load_jsonl,
    load_labels_csv,
    load_probs_csv,
    load_scores_csv,
    save_jsonl,
    save_labels_csv,
    save_probs_csv,
    save_scores_csv,
    validate,
)


def make_dataset(n=3, k=2, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=(n, k))
    probs = ProbMatrix(rng.random((n, k)))
    ids = tuple(f"ex{i}" for i in range(n))
    return MultiLabelDataset(labels, ids), probs


class TestValidate:
    def test_well_formed_input_is_ok(self):
        dataset = MultiLabelDataset([[1, 0], [0, 1], [1, 1]], ("a", "b", "c"))
        probs = ProbMatrix([[0.9, 0.1], [0.2, 0.8], [0.7, 0.6]])
        report = validate(dataset, probs)
        assert report.ok
        assert report.violations == ()

    def test_probability_out_of_range(self):
        dataset = MultiLabelDataset([[1, 0]], ("a",))
        probs = ProbMatrix([[1.2, 0.5]])
        report = validate(dataset, probs)
        assert not report.ok
        assert any("probability out of [0,1]" in v and "class 0" in v
                   for v in report.violations)

    def test_shape_mismatch(self):
        dataset = MultiLabelDataset(np.zeros((3, 2)), ("a", "b", "c"))
        probs = ProbMatrix(np.full((4, 2), 0.5))
        report = validate(dataset, probs)
        assert any("shape mismatch" in v for v in report.violations)

    def test_nan_probability(self):
        dataset = MultiLabelDataset([[1, 0]], ("a",))
        report = validate(dataset, ProbMatrix([[np.nan, 0.5]]))
        assert any("non-finite probability" in v for v in report.violations)

    def test_zero_positive_class_is_warning_not_error(self):
        dataset = MultiLabelDataset([[0, 1], [0, 1]], ("a", "b"))
        report = validate(dataset, ProbMatrix(np.full((2, 2), 0.5)))
        assert report.ok
        assert any("class 0 has zero positive" in w for w in report.warnings)
        assert any("class 1 has zero negative" in w for w in report.warnings)

    def test_boundary_probabilities_are_legal(self):
        dataset = MultiLabelDataset([[1, 0]], ("a",))
        report = validate(dataset, ProbMatrix([[0.0, 1.0]]))
        assert report.ok

    @pytest.mark.parametrize("corrupt", ["label", "prob_high", "prob_low", "prob_nan"])
    def test_single_entry_corruption_is_rejected(self, corrupt):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 2, size=(6, 4))
        probs = rng.random((6, 4))
        labels[0, 0] = 1  # keep class 0 two-sided
        labels[1, 0] = 0
        if corrupt == "label":
            labels[2, 1] = 2
        elif corrupt == "prob_high":
            probs[3, 2] = 1.0000001
        elif corrupt == "prob_low":
            probs[4, 3] = -0.25
        else:
            probs[5, 0] = np.nan
        dataset = MultiLabelDataset(labels, tuple(f"e{i}" for i in range(6)))
        report = validate(dataset, ProbMatrix(probs))
        assert not report.ok


class TestContainers:
    def test_true_labels_shape_enforced(self):
        with pytest.raises(ValueError, match="true_labels shape"):
            MultiLabelDataset([[1, 0]], ("a",), true_labels=[[1, 0], [0, 1]])

    def test_features_row_count_enforced(self):
        with pytest.raises(ValueError, match="features shape"):
            MultiLabelDataset([[1, 0]], ("a",), features=np.ones((3, 5)))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            MultiLabelDataset([[1], [0]], ("a", "a"))

    def test_arrays_are_immutable(self):
        dataset, probs = make_dataset()
        with pytest.raises(ValueError):
            dataset.given_labels[0, 0] = 1
        with pytest.raises(ValueError):
            probs.values[0, 0] = 0.5


class TestCsv:
    def test_labels_parse(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("id,label_0,label_1\na,1,0\n")
        ids, labels = load_labels_csv(path)
        assert ids == ["a"]
        assert labels.shape == (1, 2)
        assert labels.tolist() == [[1, 0]]

    def test_roundtrip_random_50x10(self, tmp_path):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 2, size=(50, 10))
        probs = rng.random((50, 10))
        probs[0, 0] = 0.0
        probs[0, 1] = 1.0
        probs[1, 0] = 1 / 3
        ids = [f"ex{i}" for i in range(50)]
        save_labels_csv(tmp_path / "l.csv", ids, labels)
        save_probs_csv(tmp_path / "p.csv", ids, probs)
        lids, loaded_labels = load_labels_csv(tmp_path / "l.csv")
        pids, loaded_probs = load_probs_csv(tmp_path / "p.csv")
        assert lids == ids and pids == ids
        assert np.array_equal(loaded_labels, labels)
        assert np.array_equal(loaded_probs.values, probs)  # bit-for-bit

    def test_label_value_2_names_the_cell(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("id,label_0,label_1\na,1,0\nb,2,0\n")
        with pytest.raises(DataFormatError, match=r"row 3, column label_0"):
            load_labels_csv(path)

    def test_duplicate_id_error(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("id,label_0\na,1\na,0\n")
        with pytest.raises(DataFormatError, match="duplicate example id"):
            load_labels_csv(path)

    def test_ragged_row_error(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("id,label_0,label_1\na,1\n")
        with pytest.raises(DataFormatError, match="row 2 has 2 cells"):
            load_labels_csv(path)

    def test_bad_header_error(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("id,lbl_0\na,1\n")
        with pytest.raises(DataFormatError, match="header"):
            load_labels_csv(path)

    def test_id_alignment_error(self):
        with pytest.raises(DataFormatError, match="id mismatch at row 1"):
            check_ids_aligned(["a", "b"], ["a", "c"], "labels vs probs")

    def test_scores_roundtrip(self, tmp_path):
        ids = ["a", "b", "c"]
        scores = np.array([0.25, -9.210340371976182, 1e-8])
        save_scores_csv(tmp_path / "s.csv", ids, scores)
        loaded_ids, loaded = load_scores_csv(tmp_path / "s.csv")
        assert loaded_ids == ids
        assert np.array_equal(loaded, scores)

    def test_load_dataset_with_truth_and_features(self, tmp_path):
        ids = ["a", "b"]
        save_labels_csv(tmp_path / "l.csv", ids, np.array([[1, 0], [0, 1]]))
        save_labels_csv(tmp_path / "t.csv", ids, np.array([[1, 1], [0, 1]]))
        from labelaudit.data import save_features_csv
        save_features_csv(tmp_path / "f.csv", ids, np.array([[3.0, 0.0], [1.0, 2.0]]))
        ds = load_dataset(tmp_path / "l.csv", features_path=tmp_path / "f.csv",
                          true_labels_path=tmp_path / "t.csv")
        assert ds.n_examples == 2
        assert ds.true_labels[0, 1] == 1
        assert ds.features[0, 0] == 3.0


class TestJsonl:
    def test_roundtrip(self, tmp_path):
        dataset, probs = make_dataset(n=20, k=4, seed=3)
        save_jsonl(tmp_path / "d.jsonl", dataset, probs)
        loaded_ds, loaded_probs = load_jsonl(tmp_path / "d.jsonl")
        assert loaded_ds.example_ids == dataset.example_ids
        assert np.array_equal(loaded_ds.given_labels, dataset.given_labels)
        assert np.array_equal(loaded_probs.values, probs.values)

    def test_load_dataset_jsonl_format(self, tmp_path):
        dataset, probs = make_dataset(n=5, k=2, seed=9)
        save_jsonl(tmp_path / "d.jsonl", dataset, probs)
        loaded = load_dataset(tmp_path / "d.jsonl", format="jsonl")
        assert np.array_equal(loaded.given_labels, dataset.given_labels)

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown format"):
            load_dataset(tmp_path / "d.xml", format="xml")

    def test_bad_label_value(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"id": "a", "labels": [0, 2], "probs": [0.1, 0.2]}\n')
        with pytest.raises(DataFormatError, match="labels must be 0/1"):
            load_jsonl(path)

    def test_inconsistent_width(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"id": "a", "labels": [0], "probs": [0.1]}\n'
                        '{"id": "b", "labels": [0, 1], "probs": [0.1, 0.2]}\n')
        with pytest.raises(DataFormatError, match="inconsistent row widths"):
            load_jsonl(path)


@given(
    n=st.integers(1, 12),
    k=st.integers(1, 6),
    seed=st.integers(0, 10_000),
)
def test_roundtrip_property(tmp_path_factory, n, k, seed):
    rng = np.random.default_rng(seed)
    label_matrix = rng.integers(0, 2, size=(n, k))
    probs = rng.random((n, k))
    ids = [f"r{i}" for i in range(n)]
    tmp = tmp_path_factory.mktemp("roundtrip")
    save_labels_csv(tmp / "l.csv", ids, label_matrix)
    save_probs_csv(tmp / "p.csv", ids, probs)
    lids, loaded_labels = load_labels_csv(tmp / "l.csv")
    _, loaded_probs = load_probs_csv(tmp / "p.csv")
    assert np.array_equal(loaded_labels, label_matrix)
    assert np.array_equal(loaded_probs.values, probs)
    report = validate(MultiLabelDataset(loaded_labels, tuple(lids)), loaded_probs)
    assert report.ok
