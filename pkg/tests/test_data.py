import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clprivacy import data
from clprivacy.curriculum import build_curriculum
from clprivacy.errors import ConfigError, InputError


def write_csv(path, text):
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_small_file(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        ds = data.load_csv(path, "label")
        assert ds.n_samples == 3
        assert ds.class_count == 2
        assert ds.features.shape == (3, 2)
        assert ds.labels.tolist() == [0, 1, 0]

    def test_sensitive_column(self, tmp_path):
        path = write_csv(
            tmp_path / "d.csv", "a,label,sens\n1,0,1\n2,1,0\n3,1,2\n"
        )
        ds = data.load_csv(path, "label", "sens")
        assert ds.sensitive.tolist() == [1, 0, 2]
        assert ds.sensitive_count == 3
        assert ds.features.shape == (3, 1)

    def test_purchase_format(self, tmp_path):
        # Purchase-style table: 600 binary feature columns, 100 classes.
        rng = np.random.default_rng(0)
        header = ",".join([f"f{i}" for i in range(600)] + ["label"])
        rows = []
        for i in range(120):
            bits = rng.integers(0, 2, 600)
            rows.append(",".join(map(str, bits.tolist() + [i % 100])))
        path = write_csv(tmp_path / "p.csv", header + "\n" + "\n".join(rows) + "\n")
        ds = data.load_csv(path, "label")
        assert ds.n_features == 600
        assert ds.class_count == 100
        assert set(np.unique(ds.features)) <= {0.0, 1.0}

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "a,b\n1,2\n")
        with pytest.raises(InputError, match="label"):
            data.load_csv(path, "label")

    def test_non_numeric_cell_names_row(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "a,label\n1,0\nx,1\n")
        with pytest.raises(InputError, match="row 3"):
            data.load_csv(path, "label")

    def test_empty_file(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "")
        with pytest.raises(InputError, match="empty"):
            data.load_csv(path, "label")


class TestSplit:
    def test_equal_thirds(self, tiny_tabular):
        ds = data.synth_tabular(9, 4, 3, flip_noise=0, seed=0)
        plan = data.SplitPlan(
            {"target_train": 1 / 3, "shadow_train": 1 / 3, "test": 1 / 3}, seed=0
        )
        splits = data.split(ds, plan)
        assert [len(v) for v in splits.values()] == [3, 3, 3]

    def test_deterministic(self, tiny_tabular):
        plan = data.SplitPlan({"target_train": 0.5, "test": 0.5}, seed=9)
        a = data.split(tiny_tabular, plan)
        b = data.split(tiny_tabular, plan)
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_five_way_equal_on_60000(self):
        ds = data.Dataset(
            features=np.zeros((60000, 1)),
            labels=np.zeros(60000, np.int64),
            class_count=1,
        )
        plan = data.SplitPlan({name: 0.2 for name in (
            "target_train", "shadow_train", "test", "reference_1", "reference_2"
        )}, seed=1)
        splits = data.split(ds, plan)
        assert all(len(v) == 12000 for v in splits.values())

    def test_disjoint_union(self, tiny_tabular):
        plan = data.SplitPlan(
            {"target_train": 0.4, "shadow_train": 0.35, "test": 0.25}, seed=2
        )
        splits = data.split(tiny_tabular, plan)
        combined = np.concatenate(list(splits.values()))
        assert len(combined) == tiny_tabular.n_samples
        assert len(np.unique(combined)) == tiny_tabular.n_samples

    def test_empty_split_rejected(self):
        ds = data.synth_tabular(3, 4, 2, seed=0)
        plan = data.SplitPlan({"a": 0.9, "b": 0.05, "c": 0.05}, seed=0)
        with pytest.raises(ConfigError):
            data.split(ds, plan)

    def test_bad_fractions_rejected(self):
        with pytest.raises(ConfigError):
            data.SplitPlan({"a": 0.5, "b": 0.4}, seed=0).validate()


class TestSynthTabular:
    def test_zero_flip_noise_equals_prototype(self):
        ds = data.synth_tabular(50, 30, 5, flip_noise=0.0, seed=1)
        for cls in range(5):
            rows = ds.features[ds.labels == cls]
            if len(rows):
                assert np.all(rows.var(axis=0) == 0.0)

    def test_deterministic(self):
        a = data.synth_tabular(40, 10, 4, flip_noise=0.2, seed=5)
        b = data.synth_tabular(40, 10, 4, flip_noise=0.2, seed=5)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_binary_features(self):
        ds = data.synth_tabular(60, 20, 3, flip_noise=0.3, seed=2)
        assert set(np.unique(ds.features)) <= {0.0, 1.0}

    def test_sensitive_block_disjoint(self):
        ds = data.synth_tabular(
            100, 30, 4, flip_noise=0.0, sensitive_count=3, sensitive_block=8, seed=4
        )
        assert ds.sensitive is not None
        assert ds.sensitive_count == 3
        # class signal lives outside the sensitive block: same class, any
        # attribute -> first 22 columns identical
        for cls in range(4):
            rows = ds.features[ds.labels == cls][:, :22]
            if len(rows):
                assert np.all(rows.var(axis=0) == 0.0)

    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            data.synth_tabular(5, 4, 10, seed=0)
        with pytest.raises(ConfigError):
            data.synth_tabular(10, 4, 2, sensitive_count=2, sensitive_block=0, seed=0)


class TestBucketize:
    def _curriculum(self, n):
        return build_curriculum(np.arange(n, dtype=float), "bootstrap")

    def test_first_ranks_map_to_level_zero(self):
        levels = data.bucketize(self._curriculum(100), 10)
        assert np.all(levels[:10] == 0)  # scores ascending -> index = rank-1

    def test_most_difficult_is_top_level(self):
        cur = self._curriculum(100)
        levels = data.bucketize(cur, 10)
        hardest = cur.order[-1]
        assert levels[hardest] == 9

    def test_uneven_bands_balanced(self):
        levels = data.bucketize(self._curriculum(25), 10)
        sizes = np.bincount(levels, minlength=10)
        assert sizes.max() - sizes.min() <= 1
        assert sizes.tolist() == [3, 3, 3, 3, 3, 2, 2, 2, 2, 2]

    @given(n=st.integers(10, 200), levels=st.integers(1, 10))
    @settings(max_examples=25, deadline=None)
    def test_partition_property(self, n, levels):
        lv = data.bucketize(self._curriculum(n), levels)
        sizes = np.bincount(lv, minlength=levels)
        assert sizes.sum() == n
        assert sizes.max() - sizes.min() <= 1

    def test_too_many_levels_rejected(self):
        with pytest.raises(ConfigError):
            data.bucketize(self._curriculum(5), 10)


class TestHoldout:
    def test_top_fraction(self):
        cur = build_curriculum(np.arange(100, dtype=float), "bootstrap")
        hold = data.top_difficult_holdout(cur, 0.04)
        assert len(hold) == 4
        assert set(hold) == {96, 97, 98, 99}

    def test_four_percent_of_20000_is_800(self):
        cur = build_curriculum(np.arange(20000, dtype=float), "bootstrap")
        assert len(data.top_difficult_holdout(cur, 0.04)) == 800


def test_split_manifest(tmp_path, tiny_tabular):
    plan = data.SplitPlan({"target_train": 0.5, "test": 0.5}, seed=0)
    splits = data.split(tiny_tabular, plan)
    path = tmp_path / "m.csv"
    data.write_split_manifest(splits, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "split_name,sample_index"
    assert len(lines) == 1 + tiny_tabular.n_samples
