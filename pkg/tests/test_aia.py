import numpy as np
import pytest

from clprivacy import aia, data, nn
from clprivacy.errors import ConfigError

from conftest import nets_equal


def passthrough_target():
    """Target whose embedding reproduces its (nonnegative) input."""
    dim = 6
    w1 = np.eye(dim)
    w2 = np.zeros((3, dim))
    return nn.Network((dim, dim, 3), [w1, w2], [np.zeros(dim), np.zeros(3)])


class TestAiaTrain:
    def test_constant_sensitive_label_learned_exactly(self):
        rng = np.random.default_rng(0)
        target = passthrough_target()
        x = rng.random((60, 6))
        s = np.zeros(60, np.int64)
        attack = aia.aia_train(target, x, s, sensitive_count=2, seed=0, epochs=10)
        preds, _ = aia.aia_infer_batch(attack, target, x)
        assert np.mean(preds == s) == 1.0

    def test_linear_function_of_embedding_recovered(self):
        rng = np.random.default_rng(1)
        target = passthrough_target()
        x = rng.random((800, 6))
        w = np.array([2.0, -1.5, 1.0, 0.5, -2.0, 1.5])
        margin = np.abs(x @ w - np.median(x @ w)) > 0.3
        x = x[margin][:400]
        s = (x @ w > np.median(x @ w)).astype(np.int64)
        attack = aia.aia_train(target, x, s, sensitive_count=2, seed=1)
        preds, _ = aia.aia_infer_batch(attack, target, x)
        assert np.mean(preds == s) >= 0.95

    def test_paper_pinned_constants(self):
        assert aia.AIA_EPOCHS == 100
        assert aia.AIA_LR == 0.01
        assert aia.AIA_HIDDEN == (128, 128)

    def test_attack_net_shape(self):
        target = passthrough_target()
        rng = np.random.default_rng(2)
        attack = aia.aia_train(target, rng.random((30, 6)),
                               rng.integers(0, 3, 30), 3, seed=0, epochs=2)
        assert attack.network.layer_dims == (6, 128, 128, 3)
        assert attack.input_dim == 6

    def test_missing_sensitive_rejected(self):
        target = passthrough_target()
        with pytest.raises(ConfigError):
            aia.aia_train(target, np.ones((4, 6)), None, 2)

    def test_accuracy_beats_majority_baseline_on_training_split(self):
        rng = np.random.default_rng(3)
        target = passthrough_target()
        x = rng.random((300, 6))
        s = (x[:, 0] > 0.6).astype(np.int64)  # imbalanced but learnable
        attack = aia.aia_train(target, x, s, sensitive_count=2, seed=2)
        report = aia.aia_report(attack, target, x, s)
        assert report["attack_accuracy"] >= report["majority_baseline"]


class TestAiaInfer:
    def test_one_hot_posterior_picks_that_attribute(self):
        target = passthrough_target()
        rng = np.random.default_rng(4)
        attack = aia.aia_train(target, rng.random((40, 6)),
                               rng.integers(0, 2, 40), 2, seed=0, epochs=2)
        pred, post = aia.aia_infer(attack, target, np.ones(6) * 0.5)
        assert pred == int(np.argmax(post))
        assert post.shape == (2,)
        assert abs(post.sum() - 1.0) < 1e-9

    def test_deterministic(self):
        target = passthrough_target()
        rng = np.random.default_rng(5)
        x = rng.random((40, 6))
        s = rng.integers(0, 2, 40)
        a1 = aia.aia_train(target, x, s, 2, seed=7, epochs=3)
        a2 = aia.aia_train(target, x, s, 2, seed=7, epochs=3)
        assert nets_equal(a1.network, a2.network)
        q = rng.random(6)
        p1, post1 = aia.aia_infer(a1, target, q)
        p2, post2 = aia.aia_infer(a2, target, q)
        assert p1 == p2
        assert np.array_equal(post1, post2)


class TestAiaReport:
    def test_majority_baseline_reported(self):
        s = np.array([0, 0, 0, 1])
        assert aia.majority_baseline(s) == pytest.approx(0.75)

    def test_per_level_table_on_synthetic(self):
        # Sensitive attribute lives in its own feature block, so accuracy
        # is roughly flat across class-difficulty buckets.
        ds = data.synth_tabular(400, 30, 4, flip_noise=0.1, cluster_spread=0.2,
                                sensitive_count=2, sensitive_block=10, seed=6)
        cfg = nn.TrainConfig(epochs=30, batch_size=32, learning_rate=0.1, seed=0)
        target = nn.init_network((30, 16, 4), seed=0)
        target, _ = nn.train(target, ds.features[:200], ds.labels[:200], cfg)
        attack = aia.aia_train(target, ds.features[200:], ds.sensitive[200:],
                               2, seed=0, epochs=30)
        levels = np.random.default_rng(0).integers(0, 10, 200)
        report = aia.aia_report(attack, target, ds.features[200:],
                                ds.sensitive[200:], difficulty_levels=levels)
        assert len(report["per_level"]) == 10
        assert sum(row["count"] for row in report["per_level"]) == 200
        assert report["attack_accuracy"] >= 0.0


def test_aia_csv(tmp_path):
    preds = np.array([1, 0])
    posts = np.array([[0.2, 0.8], [0.7, 0.3]])
    path = tmp_path / "aia.csv"
    aia.write_aia_csv(str(path), preds, posts, np.array([3, 4]),
                      np.array([1, 1]), np.array([0, 5]))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "sample_index,attribute_truth,prediction,confidence,difficulty_level"
    assert lines[1] == "3,1,1,0.8,0"
    assert lines[2] == "4,1,0,0.7,5"
