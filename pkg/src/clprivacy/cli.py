"""Command-line entry point.

One verb per experiment family: train, attack, defend, memorize, shapley,
report, run. Every verb takes --config (JSON experiment description) plus
optional --out/--seed/--repeat/--jobs overrides. Exit code 0 on success;
failures print a stage-tagged diagnostic and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, curriculum as cl, data, harness, nn
from .errors import AuditError, ConfigError, StageError


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clprivacy",
        description="Privacy audits for curriculum-trained tabular classifiers",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, desc in [
        ("train", "train the configured target models and save checkpoints"),
        ("attack", "run the configured attacks (defense forced off)"),
        ("defend", "run the configured attacks under the configured defense"),
        ("memorize", "run the holdout memorization scenarios"),
        ("shapley", "export KNN-Shapley values for the target training split"),
        ("report", "re-emit the CSV bundle from an existing report JSON"),
        ("run", "full pipeline as configured"),
    ]:
        p = sub.add_parser(verb, help=desc)
        p.add_argument("--config", required=(verb != "report"),
                       help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--repeat", type=int, default=None, help="override repeat count")
        p.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
        if verb == "report":
            p.add_argument("--report-json", default=None,
                           help="report file to re-emit (default: newest in --out)")
    return parser


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    raw = dict(cfg.raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.repeat is not None:
        raw["repeat"] = args.repeat
    if args.out is not None:
        raw["out"] = args.out
    return harness.ExperimentConfig.from_dict(raw)


def _out_dir(config: harness.ExperimentConfig) -> str:
    out = config.raw.get("out")
    if not out:
        raise ConfigError("an output directory is required (--out or config.out)")
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_run(config: harness.ExperimentConfig, jobs: int) -> int:
    out = _out_dir(config)
    report = harness.run_experiment(config, jobs=jobs)
    paths = harness.emit_report(report, out)
    for path in paths:
        print(path)
    if report.failures:
        for failure in report.failures:
            print(f"[{failure['stage']}] trial {failure['trial']}: "
                  f"{failure['error']}", file=sys.stderr)
        return 1
    return 0


def _cmd_train(config: harness.ExperimentConfig) -> int:
    """Train the trial-0 targets and export checkpoints plus artifacts."""
    out = _out_dir(config)
    c = config.raw
    seed = c["seed"]
    eid = config.experiment_id()
    dataset = harness._build_dataset(c, seed)
    splits = data.split(
        dataset, data.SplitPlan(dict(c["splits"]), seed=seed + harness._SEED_SPLIT)
    )
    data.write_split_manifest(splits, os.path.join(out, f"{eid}_splits.csv"))
    tr_idx = splits["target_train"]
    dtype = np.dtype(c["train"]["dtype"])
    hidden = tuple(c["train"]["hidden_dims"])
    X, y = dataset.features.astype(dtype), dataset.labels

    needs_measurer = any(m in config.modes for m in ("bootstrap", "anti"))
    measurer_scores = None
    normal_model = None
    if needs_measurer or "normal" in config.modes:
        mcfg = harness._train_config(c, seed + harness._SEED_MEASURER)
        net = nn.init_network(
            (X.shape[1], *hidden, dataset.class_count),
            seed=seed + harness._SEED_MEASURER, dtype=dtype,
        )
        normal_model, _ = nn.train(net, X[tr_idx], y[tr_idx], mcfg)
        if needs_measurer:
            measurer_scores = nn.per_sample_loss(normal_model, X[tr_idx], y[tr_idx])

    transfer_scorer = None
    if "transfer" in config.modes:
        ref_idx = splits["reference_1"]
        scfg = harness._train_config(c, seed + harness._SEED_MEASURER + 1)
        net = nn.init_network(
            (X.shape[1], *hidden, dataset.class_count),
            seed=seed + harness._SEED_MEASURER + 1, dtype=dtype,
        )
        transfer_scorer, _ = nn.train(net, X[ref_idx], y[ref_idx], scfg)

    schedule = harness._schedule(c, len(tr_idx))
    for mode in config.modes:
        tseed = seed + harness._SEED_TARGET + config.modes.index(mode)
        tcfg = harness._train_config(c, tseed)
        cur = harness._target_curriculum(
            mode, c, seed, X[tr_idx], y[tr_idx], dataset.class_count,
            measurer_scores, transfer_scorer,
        )
        if mode == "normal":
            model = normal_model
        else:
            net = nn.init_network(
                (X.shape[1], *hidden, dataset.class_count), seed=tseed, dtype=dtype
            )
            model, _ = cl.curriculum_train(
                net, X[tr_idx], y[tr_idx], cur, schedule, tcfg
            )
        ckpt = os.path.join(out, f"{eid}_target_{mode}.ckpt")
        nn.save_checkpoint(model, ckpt)
        print(ckpt)
        if cur is not None:
            cur_csv = os.path.join(out, f"{eid}_curriculum_{mode}.csv")
            cl.write_curriculum_csv(cur, cur_csv)
            print(cur_csv)
    return 0


def _cmd_memorize(config: harness.ExperimentConfig) -> int:
    out = _out_dir(config)
    c = config.raw
    seed = c["seed"]
    dataset = harness._build_dataset(c, seed)
    splits = data.split(
        dataset, data.SplitPlan(dict(c["splits"]), seed=seed + harness._SEED_SPLIT)
    )
    tr_idx = splits["target_train"]
    dtype = np.dtype(c["train"]["dtype"])
    X, y = dataset.features.astype(dtype), dataset.labels
    mcfg = harness._train_config(c, seed + harness._SEED_MEASURER)
    scores = cl.score_difficulty(
        X[tr_idx], y[tr_idx], dataset.class_count, method="bootstrap",
        config=mcfg, hidden_dims=tuple(c["train"]["hidden_dims"]),
    )
    cur = cl.build_curriculum(scores, "bootstrap")
    holdout = data.top_difficult_holdout(cur, c["memorization"]["holdout_fraction"])
    results = analysis.memorization_experiment(
        X[tr_idx], y[tr_idx], dataset.class_count, cur, holdout,
        harness._train_config(c, seed + harness._SEED_TARGET),
        scenarios=tuple(c["memorization"]["scenarios"]),
        hidden_dims=tuple(c["train"]["hidden_dims"]),
    )
    summary = {
        name: {"quartiles": list(res.quartiles), "median": res.median,
               "n_holdout": int(len(res.probabilities))}
        for name, res in results.items()
    }
    path = os.path.join(out, f"{config.experiment_id()}_memorization.json")
    harness._atomic_write(path, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(path)
    return 0


def _cmd_shapley(config: harness.ExperimentConfig) -> int:
    out = _out_dir(config)
    c = config.raw
    seed = c["seed"]
    dataset = harness._build_dataset(c, seed)
    splits = data.split(
        dataset, data.SplitPlan(dict(c["splits"]), seed=seed + harness._SEED_SPLIT)
    )
    tr_idx, te_idx = splits["target_train"], splits["test"]
    values = analysis.knn_shapley(
        dataset.features[tr_idx], dataset.labels[tr_idx],
        dataset.features[te_idx], dataset.labels[te_idx],
        k=c["shapley_k"],
    )
    path = os.path.join(out, f"{config.experiment_id()}_shapley.csv")
    lines = ["sample_index,value"]
    lines += [f"{int(i)},{v!r}" for i, v in zip(tr_idx, values)]
    harness._atomic_write(path, "\n".join(lines) + "\n")
    print(path)
    return 0


def _cmd_report(args) -> int:
    out = args.out
    if not out:
        print("[report] --out directory is required", file=sys.stderr)
        return 2
    path = args.report_json
    if path is None:
        candidates = sorted(
            f for f in os.listdir(out) if f.endswith("_report.json")
        )
        if not candidates:
            print(f"[report] no *_report.json under {out}", file=sys.stderr)
            return 2
        path = os.path.join(out, candidates[-1])
    with open(path) as fh:
        report = harness.parse_report(fh.read())
    for written in harness.emit_report(report, out, formats=("csv",)):
        print(written)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "report":
            return _cmd_report(args)
        config = _load(args)
        if args.verb in ("run", "defend"):
            if args.verb == "defend" and config.raw["defense"]["kind"] == "none":
                raise ConfigError("defend verb needs a defense kind other than 'none'")
            return _cmd_run(config, args.jobs)
        if args.verb == "attack":
            raw = dict(config.raw)
            raw["defense"] = {"kind": "none"}
            return _cmd_run(harness.ExperimentConfig.from_dict(raw), args.jobs)
        if args.verb == "train":
            return _cmd_train(config)
        if args.verb == "memorize":
            return _cmd_memorize(config)
        if args.verb == "shapley":
            return _cmd_shapley(config)
        raise ConfigError(f"unknown verb {args.verb!r}")
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except AuditError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
