"""Experiment orchestration: config schema, seeded repetition, train ->
attack -> analyze pipelines, and deterministic report emission.

A config describes one experiment; run_experiment repeats it `repeat`
times with trial seeds base_seed + trial_index, shares the expensive
artifacts (difficulty measurer, shadow models, attack models) across the
curricula compared within a trial, and aggregates every numeric metric
into mean +/- std. Reports serialize to JSON (round-trippable) plus a CSV
bundle; identical configs produce byte-identical files.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, aia, analysis, curriculum as cl, data, defense, mia, nn
from .errors import ConfigError, StageError

_SEED_SPLIT = 1
_SEED_MEASURER = 2
_SEED_TARGET = 3
_SEED_SHADOW = 10
_SEED_ATTACK = 30
_SEED_BASELINE = 40
_SEED_LABEL_ONLY = 50

CURRICULA = ("normal", "bootstrap", "anti", "baseline", "transfer")
ATTACKS = (
    "nn", "metric_corr", "metric_conf", "metric_ent", "metric_ment",
    "label_only", "diffcali", "aia",
)

_SCHEMA: dict[str, dict] = {
    "": {
        "name": str, "seed": int, "repeat": int, "dataset": dict, "splits": dict,
        "curricula": (list, str), "pacing": dict, "train": dict,
        "attacks": list, "shadow_count": int, "label_only": dict,
        "defense": dict, "fpr_grid": list, "n_levels": int,
        "memorization": dict, "shapley_k": int, "query_cap": (int, type(None)),
        "out": (str, type(None)),
    },
    "dataset": {
        "kind": str, "path": str, "label_column": str,
        "sensitive_column": (str, type(None)), "n_samples": int,
        "n_features": int, "class_count": int, "flip_noise": float,
        "cluster_spread": float, "sensitive_count": int, "sensitive_block": int,
    },
    "splits": {
        "target_train": float, "shadow_train": float, "test": float,
        "reference_1": float, "reference_2": float,
    },
    "pacing": {"start_fraction": float, "growth": float, "step_length": int},
    "train": {
        "epochs": int, "batch_size": int, "learning_rate": float,
        "hidden_dims": list, "dtype": str,
    },
    "label_only": {"noise_grid": list, "trials": int},
    "defense": {
        "kind": str, "dp_clip": float, "dp_noise": float,
        "memguard_budget": float, "dp_epochs": int,
    },
    "memorization": {"holdout_fraction": float, "scenarios": list},
}

_DEFAULTS: dict = {
    "name": "experiment",
    "seed": 0,
    "repeat": 5,
    "splits": {"target_train": 0.34, "shadow_train": 0.33, "test": 0.33},
    "curricula": ["normal", "bootstrap", "anti"],
    "pacing": {"start_fraction": 0.04, "growth": 1.9, "step_length": 0},
    "train": {"epochs": 200, "batch_size": 128, "learning_rate": 0.1,
              "hidden_dims": [256], "dtype": "float64"},
    "attacks": ["nn"],
    "shadow_count": 1,
    "label_only": {"noise_grid": [0.02, 0.05, 0.1], "trials": 8},
    "defense": {"kind": "none"},
    "fpr_grid": [0.001, 0.005, 0.01, 0.05, 0.1],
    "n_levels": 10,
    "memorization": {"holdout_fraction": 0.04,
                     "scenarios": list(analysis.SCENARIOS)},
    "shapley_k": 5,
    "query_cap": None,
    "out": None,
}


def _check_keys(section: str, given: dict) -> None:
    allowed = _SCHEMA[section]
    for key, value in given.items():
        if key not in allowed:
            where = section or "config"
            raise ConfigError(f"unknown key {key!r} in {where}")
        expected = allowed[key]
        expected = expected if isinstance(expected, tuple) else (expected,)
        if float in expected and isinstance(value, int) and not isinstance(value, bool):
            continue
        if not isinstance(value, expected):
            raise ConfigError(
                f"{section or 'config'}.{key} has type {type(value).__name__}"
            )


@dataclass
class ExperimentConfig:
    """Validated experiment description; see load_config for the schema."""

    raw: dict

    @classmethod
    def from_dict(cls, given: dict) -> "ExperimentConfig":
        _check_keys("", given)
        merged = json.loads(json.dumps(_DEFAULTS))
        for key, value in given.items():
            if isinstance(value, dict) and key in merged and isinstance(merged[key], dict):
                _check_keys(key, value)
                if key in ("splits", "dataset"):
                    merged[key] = value  # replace wholesale, no partial merge
                else:
                    merged[key].update(value)
            else:
                merged[key] = value
        if "dataset" not in given:
            raise ConfigError("config needs a dataset section")
        _check_keys("dataset", merged["dataset"])
        _check_keys("splits", merged["splits"])
        cfg = cls(raw=merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        c = self.raw
        if c["repeat"] < 1:
            raise ConfigError("repeat must be >= 1")
        modes = c["curricula"]
        modes = [modes] if isinstance(modes, str) else modes
        for mode in modes:
            if mode not in CURRICULA:
                raise ConfigError(f"unknown curriculum mode {mode!r}")
        for attack in c["attacks"]:
            if attack not in ATTACKS:
                raise ConfigError(f"unknown attack {attack!r}")
        kind = c["dataset"].get("kind")
        if kind not in ("synth", "csv"):
            raise ConfigError("dataset.kind must be 'synth' or 'csv'")
        if c["train"]["dtype"] not in ("float32", "float64"):
            raise ConfigError("train.dtype must be float32 or float64")
        if "transfer" in modes and "reference_1" not in c["splits"]:
            raise ConfigError("transfer curriculum needs a reference_1 split")
        if "diffcali" in c["attacks"] and c["shadow_count"] < 2:
            raise ConfigError("diffcali needs shadow_count >= 2 (surrogate + references)")
        defense.DefenseConfig(
            kind=c["defense"]["kind"],
            dp_clip=c["defense"].get("dp_clip"),
            dp_noise=c["defense"].get("dp_noise"),
            memguard_budget=c["defense"].get("memguard_budget"),
        ).validate()

    @property
    def modes(self) -> list[str]:
        modes = self.raw["curricula"]
        return [modes] if isinstance(modes, str) else list(modes)

    def experiment_id(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def load_config(path: str) -> ExperimentConfig:
    """Read a JSON experiment config; unknown keys are rejected."""
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


@dataclass
class AuditReport:
    """Per-trial metrics plus mean/std aggregates and provenance."""

    experiment_id: str
    config: dict
    trials: list
    aggregate: dict
    roc_curves: dict
    failures: list
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, given: dict) -> "AuditReport":
        return cls(**given)


# ---------------------------------------------------------------------------
# Trial pipeline


def _train_config(c: dict, seed: int, optimizer: str = "sgd",
                  dp_clip=None, dp_noise=None, epochs=None) -> nn.TrainConfig:
    t = c["train"]
    return nn.TrainConfig(
        epochs=t["epochs"] if epochs is None else epochs,
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        optimizer=optimizer,
        dp_clip=dp_clip,
        dp_noise=dp_noise,
        seed=seed,
    )


def _build_dataset(c: dict, seed: int) -> data.Dataset:
    d = c["dataset"]
    if d["kind"] == "csv":
        return data.load_csv(d["path"], d["label_column"], d.get("sensitive_column"))
    return data.synth_tabular(
        n_samples=d["n_samples"],
        n_features=d["n_features"],
        class_count=d["class_count"],
        flip_noise=d.get("flip_noise", 0.1),
        cluster_spread=d.get("cluster_spread", 0.05),
        sensitive_count=d.get("sensitive_count", 0),
        sensitive_block=d.get("sensitive_block", 0),
        seed=seed,
    )


def _schedule(c: dict, n: int) -> cl.PacingSchedule:
    m = max(1, int(np.ceil(n / c["train"]["batch_size"])))
    p = c["pacing"]
    return cl.PacingSchedule(
        n_samples=n,
        total_iterations=m,
        start_fraction=p["start_fraction"],
        growth=p["growth"],
        step_length=p["step_length"] if p["step_length"] > 0 else max(1, m // 10),
    )


def _target_curriculum(
    mode: str,
    c: dict,
    seed: int,
    features: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    measurer_scores: np.ndarray | None,
    transfer_scorer: nn.Network | None,
) -> cl.Curriculum | None:
    if mode == "normal":
        return None
    if mode == "baseline":
        return cl.build_curriculum(
            np.zeros(len(labels)), "baseline", seed=seed + _SEED_BASELINE
        )
    if mode == "transfer":
        scores = nn.per_sample_loss(transfer_scorer, features, labels)
        return cl.build_curriculum(scores, "transfer")
    return cl.build_curriculum(measurer_scores, mode)  # bootstrap | anti


def run_trial(config: ExperimentConfig, trial: int) -> dict:
    """One seeded trial: data, curricula, targets, attacks, metrics."""
    c = config.raw
    seed = c["seed"] + trial
    dtype = np.dtype(c["train"]["dtype"])
    hidden = tuple(c["train"]["hidden_dims"])
    dcfg = c["defense"]
    stage = "data"
    try:
        dataset = _build_dataset(c, seed)
        splits = data.split(
            dataset, data.SplitPlan(dict(c["splits"]), seed=seed + _SEED_SPLIT)
        )
        X = dataset.features.astype(dtype)
        y = dataset.labels
        tr_idx, sh_idx, te_idx = (
            splits["target_train"], splits["shadow_train"], splits["test"],
        )

        stage = "measurer"
        # The bootstrap measurer is the task model trained normally on the
        # same split; when the normal curriculum is also requested (and the
        # defense does not alter target training) that model is reused as
        # the normal target. Under the noisy-curriculum defense the
        # measurer itself trains under DP-SGD instead.
        dp_defended = dcfg["kind"] in ("dp_sgd", "dp_sgd_star")
        needs_measurer = any(m in config.modes for m in ("bootstrap", "anti"))
        measurer_scores = None
        normal_model = None
        normal_history = None
        if needs_measurer and dcfg["kind"] == "dp_sgd_star":
            dp_cfg = _train_config(
                c, seed + _SEED_MEASURER, "dp_sgd",
                dcfg["dp_clip"], dcfg["dp_noise"], dcfg.get("dp_epochs"),
            )
            noisy = defense.dpstar_curriculum(
                X[tr_idx], y[tr_idx], dataset.class_count, dp_cfg,
                hidden_dims=hidden,
            )
            measurer_scores = noisy.scores
        elif needs_measurer or ("normal" in config.modes and not dp_defended):
            mcfg = _train_config(c, seed + _SEED_MEASURER)
            net = nn.init_network(
                (X.shape[1], *hidden, dataset.class_count),
                seed=seed + _SEED_MEASURER, dtype=dtype,
            )
            normal_model, normal_history = nn.train(net, X[tr_idx], y[tr_idx], mcfg)
            if needs_measurer:
                measurer_scores = nn.per_sample_loss(
                    normal_model, X[tr_idx], y[tr_idx]
                )

        stage = "transfer_scorer"
        transfer_scorer = None
        if "transfer" in config.modes:
            ref_idx = splits["reference_1"]
            tcfg = _train_config(c, seed + _SEED_MEASURER + 1)
            net = nn.init_network(
                (X.shape[1], *hidden, dataset.class_count),
                seed=seed + _SEED_MEASURER + 1, dtype=dtype,
            )
            transfer_scorer, _ = nn.train(net, X[ref_idx], y[ref_idx], tcfg)

        stage = "targets"
        schedule = _schedule(c, len(tr_idx))
        targets: dict[str, nn.Network] = {}
        target_metrics: dict[str, dict] = {}
        for mode in config.modes:
            tseed = seed + _SEED_TARGET + config.modes.index(mode)
            if dp_defended:
                tcfg = _train_config(
                    c, tseed, "dp_sgd", dcfg["dp_clip"], dcfg["dp_noise"],
                    dcfg.get("dp_epochs"),
                )
            else:
                tcfg = _train_config(c, tseed)
            cur = _target_curriculum(
                mode, c, seed, X[tr_idx], y[tr_idx], dataset.class_count,
                measurer_scores, transfer_scorer,
            )
            if mode == "normal" and not dp_defended:
                model, history = normal_model, normal_history
            elif cur is None:
                net = nn.init_network(
                    (X.shape[1], *hidden, dataset.class_count),
                    seed=tseed, dtype=dtype,
                )
                model, history = nn.train(net, X[tr_idx], y[tr_idx], tcfg)
            else:
                net = nn.init_network(
                    (X.shape[1], *hidden, dataset.class_count),
                    seed=tseed, dtype=dtype,
                )
                model, history = cl.curriculum_train(
                    net, X[tr_idx], y[tr_idx], cur, schedule, tcfg
                )
            targets[mode] = model
            target_metrics[mode] = {
                "train_accuracy": nn.accuracy(model, X[tr_idx], y[tr_idx]),
                "test_accuracy": nn.accuracy(model, X[te_idx], y[te_idx]),
                "final_epoch_loss": history["loss"][-1] if history["loss"] else None,
            }

        stage = "shadows"
        wants_mia = any(a != "aia" for a in c["attacks"])
        shadows: list[mia.Shadow] = []
        knowledge = None
        if wants_mia and c["attacks"]:
            knowledge = mia.AdversaryKnowledge(
                features=X[sh_idx], labels=y[sh_idx],
                class_count=dataset.class_count,
            )
            shadows = mia.train_shadows(
                knowledge, c["shadow_count"],
                _train_config(c, seed + _SEED_SHADOW), hidden_dims=hidden,
            )

        stage = "queries"
        n_q = min(len(tr_idx), len(te_idx))
        if c["query_cap"]:
            n_q = min(n_q, int(c["query_cap"]))
        q_members, q_non = tr_idx[:n_q], te_idx[:n_q]
        q_idx = np.concatenate([q_members, q_non])
        qx, qy = X[q_idx], y[q_idx]
        q_truth = np.concatenate([np.ones(n_q, bool), np.zeros(n_q, bool)])

        # Difficulty levels for bucket tables come from an out-of-sample
        # measurer: the first shadow model scores the query members.
        levels = np.full(2 * n_q, -1, dtype=np.int64)
        if shadows and n_q >= c["n_levels"]:
            member_scores = nn.per_sample_loss(shadows[0].model, X[q_members],
                                               y[q_members])
            member_cur = cl.build_curriculum(member_scores, "bootstrap")
            levels[:n_q] = data.bucketize(member_cur, c["n_levels"])

        stage = "attacks"
        results: dict[str, dict] = {mode: {} for mode in config.modes}
        roc_curves: dict[str, dict] = {mode: {} for mode in config.modes}
        attack_names = [a for a in c["attacks"] if a != "aia"]
        nn_attack = None
        if shadows and ("nn" in attack_names or dcfg["kind"] == "memguard"):
            nn_attack = mia.nn_attack_train(
                shadows[:1], knowledge, k=3, seed=seed + _SEED_ATTACK
            )
        diff_attack = diff_state = None
        if "diffcali" in attack_names:
            surrogate, refs = shadows[0], [s.model for s in shadows[1:]]
            d_membership = np.zeros(len(sh_idx), bool)
            d_membership[surrogate.member_idx] = True
            ref_scores = np.mean(
                np.stack([nn.per_sample_loss(r, X[sh_idx], y[sh_idx]) for r in refs]),
                axis=0,
            )
            attacker_cur = cl.build_curriculum(ref_scores, "bootstrap")
            diff_attack, diff_state = mia.diffcali_train(
                surrogate.model, refs, X[sh_idx], y[sh_idx], d_membership,
                attacker_cur, seed=seed + _SEED_ATTACK + 1,
            )

        for mode in config.modes:
            target = targets[mode]
            posts = nn.forward_batch(target, qx)
            defended_posts = posts
            if dcfg["kind"] == "memguard":
                defended_posts = defense.memguard_batch(
                    posts, nn_attack, dcfg["memguard_budget"]
                )
            target_losses = mia.losses_from_posteriors(defended_posts, qy)
            for name in attack_names:
                if name == "nn":
                    verdicts = mia.nn_attack_infer_from_posteriors(
                        nn_attack, defended_posts
                    )
                elif name.startswith("metric_"):
                    verdicts = mia.metric_attack(
                        name.removeprefix("metric_"), target, shadows[0],
                        knowledge, qx, qy, query_posteriors=defended_posts,
                    )
                elif name == "label_only":
                    lo = c["label_only"]
                    verdicts = mia.label_only_attack(
                        target, qx, shadows[0], knowledge,
                        noise_grid=tuple(lo["noise_grid"]), trials=lo["trials"],
                        seed=seed + _SEED_LABEL_ONLY,
                    )
                elif name == "diffcali":
                    verdicts = mia.diffcali_infer_batch(
                        diff_attack, diff_state, target,
                        [s.model for s in shadows[1:]], qx, qy,
                        target_losses=target_losses
                        if dcfg["kind"] == "memguard" else None,
                    )
                else:
                    raise ConfigError(f"unhandled attack {name!r}")
                metrics, curve = _attack_metrics(
                    verdicts, q_truth, target_losses, levels, c
                )
                results[mode][name] = metrics
                roc_curves[mode][name] = _decimate_curve(curve)

            if "aia" in c["attacks"]:
                results[mode]["aia"] = _aia_metrics(
                    c, dataset, X, y, sh_idx, te_idx, target, seed
                )

        return {
            "trial": trial,
            "seed": seed,
            "targets": target_metrics,
            "attacks": results,
            "_roc_curves": roc_curves,
        }
    except Exception as exc:  # noqa: BLE001 - converted to a stage-tagged error
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, f"trial {trial}: {exc}") from exc


def _attack_metrics(
    verdicts: list[mia.MembershipVerdict],
    truth: np.ndarray,
    losses: np.ndarray,
    levels: np.ndarray,
    c: dict,
) -> tuple[dict, analysis.RocCurve]:
    pred = np.array([v.is_member for v in verdicts])
    raw = np.array([v.raw_score for v in verdicts])
    # Attack's member-class posterior: confidence belongs to the predicted
    # class (degenerate 1.0 for hard threshold attacks).
    member_conf = np.array(
        [v.confidence if v.is_member else 1.0 - v.confidence for v in verdicts]
    )
    curve, tpr_table = analysis.roc_and_tpr(raw, truth, tuple(c["fpr_grid"]))
    bucket = analysis.bucket_report(
        truth, pred, member_conf, losses, levels, c["n_levels"]
    )
    metrics = {
        "accuracy": float(np.mean(pred == truth)),
        "auc": curve.auc,
        "tpr_at_fpr": tpr_table,
        "bucket": bucket,
    }
    return metrics, curve


def _aia_metrics(c, dataset, X, y, sh_idx, te_idx, target, seed) -> dict:
    if dataset.sensitive is None:
        raise ConfigError("aia attack needs a dataset with a sensitive attribute")
    attack = aia.aia_train(
        target, X[sh_idx], dataset.sensitive[sh_idx], dataset.sensitive_count,
        seed=seed + _SEED_ATTACK + 2,
    )
    return aia.aia_report(attack, target, X[te_idx], dataset.sensitive[te_idx])


def _decimate_curve(curve: analysis.RocCurve, cap: int = 512) -> dict:
    n = len(curve.fpr)
    idx = np.unique(
        np.concatenate([np.linspace(0, n - 1, min(cap, n)).astype(int), [0, n - 1]])
    )
    return {
        "fpr": [float(curve.fpr[i]) for i in idx],
        "tpr": [float(curve.tpr[i]) for i in idx],
        "auc": curve.auc,
    }


# ---------------------------------------------------------------------------
# Aggregation


def _aggregate(trials: list[dict]) -> dict:
    """mean/std (population) for every numeric leaf shared by all trials."""

    def walk(values):
        first = values[0]
        if isinstance(first, dict):
            return {k: walk([v[k] for v in values]) for k in first}
        if isinstance(first, list):
            return [walk([v[i] for v in values]) for i in range(len(first))]
        if isinstance(first, bool) or first is None:
            return first
        if isinstance(first, int) and all(v == first for v in values):
            return first  # structural constants (levels, counts) stay as-is
        if isinstance(first, (int, float)):
            if any(v is None for v in values):
                return None
            arr = np.asarray(values, dtype=np.float64)
            return {"mean": float(arr.mean()), "std": float(arr.std())}
        return first

    payload = [
        {"targets": t["targets"], "attacks": t["attacks"]} for t in trials
    ]
    return walk(payload) if payload else {}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> AuditReport:
    """Run every trial (optionally in parallel processes) and aggregate.

    A failing trial is recorded under failures with its stage name; the
    surviving trials still aggregate. Raises only when every trial fails.
    """
    trials, failures = [], []
    indices = list(range(config.raw["repeat"]))
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(run_trial, config, t): t for t in indices}
            outcomes = {}
            for fut in concurrent.futures.as_completed(futs):
                outcomes[futs[fut]] = fut
            for t in indices:
                try:
                    trials.append(outcomes[t].result())
                except StageError as exc:
                    failures.append({"trial": t, "stage": exc.stage, "error": str(exc)})
    else:
        for t in indices:
            try:
                trials.append(run_trial(config, t))
            except StageError as exc:
                failures.append({"trial": t, "stage": exc.stage, "error": str(exc)})
    if not trials:
        raise StageError("run", f"all {len(indices)} trials failed: {failures}")

    roc_curves = trials[0].pop("_roc_curves", {})
    for t in trials[1:]:
        t.pop("_roc_curves", None)
    return AuditReport(
        experiment_id=config.experiment_id(),
        config=config.raw,
        trials=trials,
        aggregate=_aggregate(trials),
        roc_curves=roc_curves,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Emission


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def report_json(report: AuditReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> AuditReport:
    return AuditReport.from_dict(json.loads(text))


def emit_report(
    report: AuditReport, out_dir: str, formats: tuple[str, ...] = ("json", "csv")
) -> list[str]:
    """Write the JSON summary and CSV bundle; returns the paths written.

    Filenames derive from the experiment id; writes are atomic (temp file
    then rename), so re-emission never leaves partial files.
    """
    os.makedirs(out_dir, exist_ok=True)
    eid = report.experiment_id
    written = []
    if "json" in formats:
        path = os.path.join(out_dir, f"{eid}_report.json")
        _atomic_write(path, report_json(report))
        written.append(path)
    if "csv" in formats:
        written.extend(_emit_csv_bundle(report, out_dir, eid))
    return written


def _emit_csv_bundle(report: AuditReport, out_dir: str, eid: str) -> list[str]:
    import csv as _csv
    import io

    written = []

    def write(path, rows, header):
        buf = io.StringIO()
        writer = _csv.writer(buf)
        writer.writerow(header)
        writer.writerows(rows)
        _atomic_write(path, buf.getvalue())
        written.append(path)

    rows = []
    agg = report.aggregate
    for mode, metrics in sorted(agg.get("targets", {}).items()):
        for metric, value in sorted(metrics.items()):
            if isinstance(value, dict):
                rows.append([mode, "target", metric, repr(value["mean"]),
                             repr(value["std"])])
    for mode, attacks in sorted(agg.get("attacks", {}).items()):
        for attack, metrics in sorted(attacks.items()):
            for metric in ("accuracy", "auc"):
                if metric in metrics and isinstance(metrics[metric], dict):
                    rows.append([mode, attack, metric,
                                 repr(metrics[metric]["mean"]),
                                 repr(metrics[metric]["std"])])
    write(os.path.join(out_dir, f"{eid}_metrics.csv"), rows,
          ["curriculum", "attack", "metric", "mean", "std"])

    for mode, attacks in sorted(report.roc_curves.items()):
        for attack, curve in sorted(attacks.items()):
            path = os.path.join(out_dir, f"{eid}_roc_{mode}_{attack}.csv")
            write(path, [[repr(f), repr(t)] for f, t in
                         zip(curve["fpr"], curve["tpr"])], ["fpr", "tpr"])

    for mode, attacks in sorted(agg.get("attacks", {}).items()):
        for attack, metrics in sorted(attacks.items()):
            bucket = metrics.get("bucket")
            if not bucket:
                continue
            rows = []
            for level_row in bucket["levels"]:
                def cell(v):
                    if isinstance(v, dict):
                        return repr(v["mean"])
                    return "" if v is None else repr(v)
                rows.append([
                    level_row["level"]
                    if isinstance(level_row["level"], int)
                    else int(level_row["level"]["mean"]),
                    cell(level_row["n_members"]),
                    cell(level_row["accuracy"]),
                    cell(level_row["member_confidence"]),
                    cell(level_row["nonmember_confidence"]),
                ])
            path = os.path.join(out_dir, f"{eid}_buckets_{mode}_{attack}.csv")
            write(path, rows, ["level", "n_members", "accuracy",
                               "member_confidence", "nonmember_confidence"])
    return written
