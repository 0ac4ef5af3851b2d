"""Attribute-inference attack on target-model embeddings.

The attacker holds an auxiliary split with known sensitive attributes,
queries the target for each sample's penultimate-layer representation, and
fits a classifier from representation to attribute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError

AIA_EPOCHS = 100
AIA_LR = 0.01
AIA_HIDDEN = (128, 128)


@dataclass
class AiaAttackModel:
    network: nn.Network

    @property
    def input_dim(self) -> int:
        return self.network.input_dim


def aia_train(
    target: nn.Network,
    aux_features: np.ndarray,
    aux_sensitive: np.ndarray,
    sensitive_count: int,
    seed: int = 0,
    epochs: int = AIA_EPOCHS,
    lr: float = AIA_LR,
) -> AiaAttackModel:
    """Fit the attribute classifier on (embedding, sensitive) pairs.

    The auxiliary split must be disjoint from the target's training data;
    cross-entropy loss, plain SGD.
    """
    if aux_sensitive is None:
        raise ConfigError("auxiliary split has no sensitive labels")
    aux_sensitive = np.asarray(aux_sensitive)
    if sensitive_count < 1 or aux_sensitive.max() >= sensitive_count:
        raise ConfigError("sensitive labels must lie in [0, sensitive_count)")
    emb = nn.embed_batch(target, aux_features).astype(np.float64)
    net = nn.init_network((emb.shape[1], *AIA_HIDDEN, sensitive_count), seed=seed)
    cfg = nn.TrainConfig(
        epochs=epochs, batch_size=128, learning_rate=lr, optimizer="sgd", seed=seed
    )
    model, _ = nn.train(net, emb, aux_sensitive, cfg)
    return AiaAttackModel(network=model)


def aia_infer_batch(
    attack: AiaAttackModel, target: nn.Network, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Predicted attributes and full posteriors for a batch."""
    emb = nn.embed_batch(target, x).astype(np.float64)
    posts = nn.forward_batch(attack.network, emb)
    return posts.argmax(axis=1), posts


def aia_infer(
    attack: AiaAttackModel, target: nn.Network, x: np.ndarray
) -> tuple[int, np.ndarray]:
    """Predicted attribute and posterior for a single sample."""
    preds, posts = aia_infer_batch(attack, target, np.asarray(x)[None, :])
    return int(preds[0]), posts[0]


def majority_baseline(sensitive: np.ndarray) -> float:
    """Accuracy of always guessing the most common attribute."""
    _, counts = np.unique(np.asarray(sensitive), return_counts=True)
    return float(counts.max() / counts.sum())


def aia_report(
    attack: AiaAttackModel,
    target: nn.Network,
    x: np.ndarray,
    sensitive: np.ndarray,
    difficulty_levels: np.ndarray | None = None,
    n_levels: int = 10,
) -> dict:
    """Attack accuracy with the majority-class baseline alongside, plus a
    per-difficulty-bucket accuracy table when levels are supplied."""
    preds, _ = aia_infer_batch(attack, target, x)
    sensitive = np.asarray(sensitive)
    report = {
        "attack_accuracy": float(np.mean(preds == sensitive)),
        "majority_baseline": majority_baseline(sensitive),
    }
    if difficulty_levels is not None:
        levels = np.asarray(difficulty_levels)
        table = []
        for level in range(n_levels):
            mask = levels == level
            table.append(
                {
                    "level": level,
                    "accuracy": float(np.mean(preds[mask] == sensitive[mask]))
                    if mask.any()
                    else None,
                    "count": int(mask.sum()),
                }
            )
        report["per_level"] = table
    return report


def write_aia_csv(
    path: str,
    predictions: np.ndarray,
    posteriors: np.ndarray,
    sample_indices: np.ndarray,
    truth: np.ndarray,
    difficulty_levels: np.ndarray | None = None,
) -> None:
    """Per-sample attribute verdicts, same shape as the MIA verdict export."""
    import csv

    levels = (
        difficulty_levels
        if difficulty_levels is not None
        else np.full(len(predictions), -1, dtype=np.int64)
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_index", "attribute_truth", "prediction", "confidence",
             "difficulty_level"]
        )
        for row, (i, pred, t, lv) in enumerate(
            zip(sample_indices, predictions, truth, levels)
        ):
            conf = float(posteriors[row, pred])
            writer.writerow([int(i), int(t), int(pred), repr(conf), int(lv)])
