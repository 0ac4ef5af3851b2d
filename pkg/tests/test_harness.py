import json
import os

import pytest

from clprivacy import cli, harness
from clprivacy.errors import ConfigError, StageError


def small_config(**overrides):
    base = {
        "name": "unit",
        "seed": 3,
        "repeat": 2,
        "dataset": {"kind": "synth", "n_samples": 400, "n_features": 24,
                    "class_count": 6, "flip_noise": 0.25, "cluster_spread": 0.12},
        "splits": {"target_train": 0.3, "shadow_train": 0.4, "test": 0.3},
        "curricula": ["normal", "bootstrap"],
        "train": {"epochs": 12, "batch_size": 32, "learning_rate": 0.1,
                  "hidden_dims": [16], "dtype": "float64"},
        "attacks": ["nn"],
        "shadow_count": 1,
        "n_levels": 5,
    }
    base.update(overrides)
    return base


class TestConfig:
    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            harness.ExperimentConfig.from_dict(small_config(bogus=1))

    def test_unknown_nested_key_rejected(self):
        cfg = small_config()
        cfg["train"] = {"epochs": 5, "warmup": 2}
        with pytest.raises(ConfigError, match="warmup"):
            harness.ExperimentConfig.from_dict(cfg)

    def test_missing_dataset_rejected(self):
        cfg = small_config()
        del cfg["dataset"]
        with pytest.raises(ConfigError, match="dataset"):
            harness.ExperimentConfig.from_dict(cfg)

    def test_unknown_attack_rejected(self):
        with pytest.raises(ConfigError, match="attack"):
            harness.ExperimentConfig.from_dict(small_config(attacks=["lira"]))

    def test_diffcali_needs_two_shadows(self):
        with pytest.raises(ConfigError, match="diffcali"):
            harness.ExperimentConfig.from_dict(
                small_config(attacks=["diffcali"], shadow_count=1)
            )

    def test_experiment_id_deterministic(self):
        a = harness.ExperimentConfig.from_dict(small_config())
        b = harness.ExperimentConfig.from_dict(small_config())
        assert a.experiment_id() == b.experiment_id()
        c = harness.ExperimentConfig.from_dict(small_config(seed=4))
        assert a.experiment_id() != c.experiment_id()

    def test_string_curricula_accepted(self):
        cfg = harness.ExperimentConfig.from_dict(small_config(curricula="normal"))
        assert cfg.modes == ["normal"]


@pytest.fixture(scope="module")
def report():
    cfg = harness.ExperimentConfig.from_dict(small_config())
    return harness.run_experiment(cfg)


class TestRunExperiment:

    def test_trials_and_aggregate_shape(self, report):
        assert len(report.trials) == 2
        assert report.failures == []
        for mode in ("normal", "bootstrap"):
            agg = report.aggregate["targets"][mode]["test_accuracy"]
            assert set(agg) == {"mean", "std"}
            assert 0.0 <= agg["mean"] <= 1.0

    def test_repeat_one_gives_zero_std(self):
        cfg = harness.ExperimentConfig.from_dict(small_config(repeat=1))
        report = harness.run_experiment(cfg)
        agg = report.aggregate["targets"]["normal"]["test_accuracy"]
        assert agg["std"] == 0.0

    def test_identical_configs_give_identical_reports(self, report):
        cfg = harness.ExperimentConfig.from_dict(small_config())
        again = harness.run_experiment(cfg)
        assert harness.report_json(again) == harness.report_json(report)

    def test_json_round_trip(self, report):
        text = harness.report_json(report)
        assert harness.parse_report(text) == report

    def test_config_echo_closure(self, report):
        # The echoed config re-runs the experiment exactly.
        echoed = harness.ExperimentConfig.from_dict(report.config)
        again = harness.run_experiment(echoed)
        assert harness.report_json(again) == harness.report_json(report)

    def test_roc_curves_monotone(self, report):
        for mode, attacks in report.roc_curves.items():
            for name, curve in attacks.items():
                fpr, tpr = curve["fpr"], curve["tpr"]
                assert fpr[0] == 0.0 and tpr[0] == 0.0
                assert fpr[-1] == 1.0 and tpr[-1] == 1.0
                assert all(a <= b for a, b in zip(fpr, fpr[1:]))
                assert all(a <= b for a, b in zip(tpr, tpr[1:]))

    def test_emission_and_atomic_overwrite(self, report, tmp_path):
        out = str(tmp_path)
        paths = harness.emit_report(report, out)
        assert any(p.endswith("_report.json") for p in paths)
        blobs = {p: open(p, "rb").read() for p in paths}
        paths2 = harness.emit_report(report, out)
        assert paths2 == paths
        for p in paths:
            assert open(p, "rb").read() == blobs[p]
            assert not os.path.exists(p + ".tmp")

    def test_roc_csv_headers(self, report, tmp_path):
        paths = harness.emit_report(report, str(tmp_path))
        roc = [p for p in paths if "_roc_" in os.path.basename(p)][0]
        lines = open(roc).read().strip().splitlines()
        assert lines[0] == "fpr,tpr"
        fprs = [float(line.split(",")[0]) for line in lines[1:]]
        tprs = [float(line.split(",")[1]) for line in lines[1:]]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)

    def test_stage_errors_collected_per_trial(self):
        # class_count > n_samples only fails at data build time inside trials
        cfg = harness.ExperimentConfig.from_dict(small_config())
        cfg.raw["dataset"]["class_count"] = 10_000
        with pytest.raises(StageError, match="data"):
            harness.run_experiment(cfg)


class TestAiaPipeline:
    def test_aia_attack_reports_baseline_and_accuracy(self):
        cfg = harness.ExperimentConfig.from_dict(small_config(
            repeat=1,
            dataset={"kind": "synth", "n_samples": 500, "n_features": 30,
                     "class_count": 5, "flip_noise": 0.2,
                     "cluster_spread": 0.15, "sensitive_count": 3,
                     "sensitive_block": 8},
            attacks=["nn", "aia"],
            curricula=["normal"],
        ))
        report = harness.run_experiment(cfg)
        aia_metrics = report.aggregate["attacks"]["normal"]["aia"]
        assert 0.0 <= aia_metrics["attack_accuracy"]["mean"] <= 1.0
        assert 0.0 < aia_metrics["majority_baseline"]["mean"] <= 1.0

    def test_aia_without_sensitive_fails_with_stage(self):
        cfg = harness.ExperimentConfig.from_dict(small_config(
            repeat=1, attacks=["aia"], curricula=["normal"]
        ))
        with pytest.raises(StageError, match="attacks"):
            harness.run_experiment(cfg)


class TestMemguardPipeline:
    def test_memguard_keeps_labels_and_tames_nn_attack(self):
        cfg = harness.ExperimentConfig.from_dict(small_config(
            repeat=1,
            defense={"kind": "memguard", "memguard_budget": 1.0},
            curricula=["normal"],
            train={"epochs": 40, "batch_size": 32, "learning_rate": 0.1,
                   "hidden_dims": [16], "dtype": "float64"},
        ))
        report = harness.run_experiment(cfg)
        defended = report.aggregate["attacks"]["normal"]["nn"]["accuracy"]["mean"]
        base_cfg = harness.ExperimentConfig.from_dict(small_config(
            repeat=1, curricula=["normal"],
            train={"epochs": 40, "batch_size": 32, "learning_rate": 0.1,
                   "hidden_dims": [16], "dtype": "float64"},
        ))
        base = harness.run_experiment(base_cfg)
        undefended = base.aggregate["attacks"]["normal"]["nn"]["accuracy"]["mean"]
        # same target, same measurements: defense can only reduce the attack
        assert defended <= undefended + 1e-9
        assert base.aggregate["targets"]["normal"]["test_accuracy"] == \
            report.aggregate["targets"]["normal"]["test_accuracy"]


class TestCli:
    def _write_config(self, tmp_path, **overrides):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(small_config(**overrides)))
        return str(path)

    def test_run_verb_writes_report(self, tmp_path, capsys):
        config = self._write_config(tmp_path)
        out = str(tmp_path / "out")
        code = cli.main(["run", "--config", config, "--out", out])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert any(p.endswith("_report.json") for p in printed)
        report_path = [p for p in printed if p.endswith("_report.json")][0]
        report = harness.parse_report(open(report_path).read())
        assert report.config["out"] == out

    def test_attack_verb_forces_defense_off(self, tmp_path, capsys):
        config = self._write_config(
            tmp_path, defense={"kind": "memguard", "memguard_budget": 1.0}
        )
        out = str(tmp_path / "out")
        assert cli.main(["attack", "--config", config, "--out", out]) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        report_path = [p for p in printed if p.endswith("_report.json")][0]
        report = harness.parse_report(open(report_path).read())
        assert report.config["defense"]["kind"] == "none"

    def test_defend_verb_requires_defense(self, tmp_path, capsys):
        config = self._write_config(tmp_path)
        code = cli.main(["defend", "--config", config,
                         "--out", str(tmp_path / "out")])
        assert code == 2

    def test_train_verb_saves_checkpoints(self, tmp_path, capsys):
        config = self._write_config(tmp_path, repeat=1)
        out = str(tmp_path / "out")
        assert cli.main(["train", "--config", config, "--out", out]) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert any(p.endswith("_target_normal.ckpt") for p in printed)
        assert any(p.endswith("_target_bootstrap.ckpt") for p in printed)
        assert any(p.endswith("_curriculum_bootstrap.csv") for p in printed)
        assert os.path.exists(os.path.join(
            out, [os.path.basename(p) for p in printed
                  if p.endswith("_target_normal.ckpt")][0]
        ))

    def test_memorize_verb(self, tmp_path, capsys):
        config = self._write_config(
            tmp_path,
            memorization={"holdout_fraction": 0.1,
                          "scenarios": ["not_seen", "last_seen"]},
        )
        out = str(tmp_path / "out")
        assert cli.main(["memorize", "--config", config, "--out", out]) == 0
        path = capsys.readouterr().out.strip().splitlines()[-1]
        summary = json.loads(open(path).read())
        assert set(summary) == {"not_seen", "last_seen"}
        for entry in summary.values():
            assert len(entry["quartiles"]) == 3

    def test_shapley_verb(self, tmp_path, capsys):
        config = self._write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["shapley", "--config", config, "--out", out]) == 0
        path = capsys.readouterr().out.strip().splitlines()[-1]
        lines = open(path).read().strip().splitlines()
        assert lines[0] == "sample_index,value"
        assert len(lines) == 1 + 120  # target_train split size

    def test_report_verb_reemits_csv(self, tmp_path, capsys):
        config = self._write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["run", "--config", config, "--out", out]) == 0
        capsys.readouterr()
        assert cli.main(["report", "--out", out]) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert any(p.endswith("_metrics.csv") for p in printed)

    def test_seed_override_changes_report(self, tmp_path, capsys):
        config = self._write_config(tmp_path)
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        assert cli.main(["run", "--config", config, "--out", out1,
                         "--seed", "11"]) == 0
        assert cli.main(["run", "--config", config, "--out", out2,
                         "--seed", "12"]) == 0
        capsys.readouterr()
        r1 = [f for f in os.listdir(out1) if f.endswith("_report.json")][0]
        r2 = [f for f in os.listdir(out2) if f.endswith("_report.json")][0]
        assert r1 != r2  # id derives from the echoed config

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(small_config(bogus=True)))
        assert cli.main(["run", "--config", str(path),
                         "--out", str(tmp_path / "out")]) == 2
