"""Difficulty scoring, curriculum construction, pacing, and ordered training.

A curriculum is a fixed permutation of the training indices, easy first,
reused identically across every epoch. Training exposes a growing prefix
of that order, whose size per iteration comes from an exponential pacing
schedule, and draws each mini-batch from the current prefix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, InputError

MODES = ("bootstrap", "transfer", "baseline", "anti")


@dataclass
class Curriculum:
    """Difficulty scores plus a fixed training order (easiest sample first).

    ranks maps sample index -> 1-based rank; the easiest sample has rank 1
    and the most difficult rank N.
    """

    scores: np.ndarray
    order: np.ndarray
    mode: str
    ranks: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.order.shape[0])

    def validate(self) -> None:
        n = self.n_samples
        if sorted(self.order.tolist()) != list(range(n)):
            raise InputError("order must be a permutation of 0..N-1")
        along = self.scores[self.order]
        if self.mode in ("bootstrap", "transfer") and np.any(np.diff(along) < 0):
            raise InputError(f"{self.mode} curriculum must be sorted easy to hard")
        if self.mode == "anti" and np.any(np.diff(along) > 0):
            raise InputError("anti curriculum must be sorted hard to easy")


@dataclass
class PacingSchedule:
    """Exponential prefix growth: starts at a fraction of the data and
    multiplies by `growth` every `step_length` iterations, capped at N."""

    n_samples: int
    total_iterations: int
    start_fraction: float = 0.04
    growth: float = 1.9
    step_length: int = 1

    @classmethod
    def default(cls, n_samples: int, total_iterations: int) -> "PacingSchedule":
        return cls(
            n_samples=n_samples,
            total_iterations=total_iterations,
            start_fraction=0.04,
            growth=1.9,
            step_length=max(1, total_iterations // 10),
        )

    def validate(self) -> None:
        if self.n_samples < 1 or self.total_iterations < 1:
            raise ConfigError("schedule needs positive sample and iteration counts")
        if not 0.0 < self.start_fraction <= 1.0:
            raise ConfigError("start_fraction must be in (0, 1]")
        if self.growth <= 1.0:
            raise ConfigError("growth must be > 1")
        if self.step_length < 1:
            raise ConfigError("step_length must be >= 1")


def pacing_size(schedule: PacingSchedule, iteration: int) -> int:
    """Prefix size for a 1-based iteration index."""
    schedule.validate()
    if not 1 <= iteration <= schedule.total_iterations:
        raise InputError(
            f"iteration {iteration} outside 1..{schedule.total_iterations}"
        )
    step = (iteration - 1) // schedule.step_length
    raw = schedule.n_samples * schedule.start_fraction * schedule.growth**step
    return int(min(schedule.n_samples, np.ceil(raw)))


def score_difficulty(
    features: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    method: str = "bootstrap",
    config: nn.TrainConfig | None = None,
    scorer: nn.Network | None = None,
    hidden_dims: tuple[int, ...] = (256,),
) -> np.ndarray:
    """Per-sample difficulty = measurer cross-entropy loss (higher = harder).

    bootstrap trains a fresh measurer normally on the same split; transfer
    scores with a caller-supplied pre-trained network.
    """
    if method == "bootstrap":
        if config is None:
            raise ConfigError("bootstrap scoring needs a TrainConfig")
        dims = (features.shape[1], *hidden_dims, class_count)
        measurer = nn.init_network(dims, seed=config.seed,
                                   dtype=np.asarray(features).dtype)
        measurer, _ = nn.train(measurer, features, labels, config)
    elif method == "transfer":
        if scorer is None:
            raise ConfigError("transfer scoring needs a scorer network")
        measurer = scorer
    else:
        raise ConfigError(f"unknown difficulty method {method!r}")
    return nn.per_sample_loss(measurer, features, labels)


def build_curriculum(
    scores: np.ndarray, mode: str, seed: int | None = None
) -> Curriculum:
    """Order samples by difficulty score under one of the four modes.

    bootstrap/transfer sort ascending (ties broken by original index),
    anti is the exact reverse of that order, and baseline is a seeded
    random permutation unrelated to the scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] < 1:
        raise InputError("scores must be a nonempty vector")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "baseline":
        if seed is None:
            raise ConfigError("baseline curriculum needs a seed")
        order = np.random.default_rng(seed).permutation(scores.shape[0])
    else:
        order = np.argsort(scores, kind="stable")
        if mode == "anti":
            order = order[::-1].copy()
    ranks = np.empty(scores.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    cur = Curriculum(scores=scores, order=order, mode=mode, ranks=ranks)
    cur.validate()
    return cur


def rank(curriculum: Curriculum, sample_index: int) -> int:
    """1-based position of a sample in the curriculum order."""
    if not 0 <= sample_index < curriculum.n_samples:
        raise InputError(f"sample index {sample_index} out of range")
    return int(curriculum.ranks[sample_index])


def curriculum_train(
    net: nn.Network,
    x: np.ndarray,
    y: np.ndarray,
    curriculum: Curriculum,
    schedule: PacingSchedule,
    config: nn.TrainConfig,
    batch_mode: str = "sample",
    on_batch=None,
) -> tuple[nn.Network, dict[str, list[float]]]:
    """Ordered training loop: same curriculum order every epoch.

    Each epoch runs schedule.total_iterations steps; iteration i exposes
    the first pacing_size(schedule, i) samples of the curriculum order and
    takes one optimizer step on a mini-batch from that prefix. batch_mode
    "sample" draws the batch uniformly without replacement; "sweep" skips
    the sampling and walks the prefix in contiguous chunks instead.

    on_batch, if given, is called with (epoch, iteration, prefix_size,
    batch_indices) before every step; intended for tests and tracing.
    """
    config.validate()
    schedule.validate()
    if batch_mode not in ("sample", "sweep"):
        raise ConfigError(f"batch_mode must be 'sample' or 'sweep', got {batch_mode!r}")
    x = nn._check_features(net, x)
    if curriculum.n_samples != x.shape[0] or schedule.n_samples != x.shape[0]:
        raise ConfigError(
            f"curriculum ({curriculum.n_samples}) and schedule "
            f"({schedule.n_samples}) must cover the split ({x.shape[0]})"
        )
    y = nn._check_labels(y, x.shape[0], net.output_dim)
    rng = np.random.default_rng(config.seed)
    out = net.copy()
    order = curriculum.order
    sizes = [pacing_size(schedule, i) for i in range(1, schedule.total_iterations + 1)]
    history: dict[str, list[float]] = {"loss": [], "accuracy": []}
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        epoch_correct = 0
        seen = 0
        for i, size in enumerate(sizes, start=1):
            prefix = order[:size]
            if batch_mode == "sample":
                take = min(config.batch_size, size)
                batch_idx = prefix[rng.choice(size, size=take, replace=False)]
            else:
                start = ((i - 1) * config.batch_size) % size
                batch_idx = prefix[start : start + config.batch_size]
            if on_batch is not None:
                on_batch(epoch, i, size, batch_idx)
            bx, by = x[batch_idx], y[batch_idx]
            epoch_loss, epoch_correct = nn._train_step(
                out, bx, by, config, rng, epoch_loss, epoch_correct
            )
            seen += len(batch_idx)
        history["loss"].append(epoch_loss / max(seen, 1))
        history["accuracy"].append(epoch_correct / max(seen, 1))
    return out, history


def write_curriculum_csv(curriculum: Curriculum, path: str) -> None:
    """CSV export with columns (sample_index, score, rank)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "score", "rank"])
        for i in range(curriculum.n_samples):
            writer.writerow(
                [i, repr(float(curriculum.scores[i])), int(curriculum.ranks[i])]
            )
