"""Memorization experiments, KNN-Shapley valuation, ROC, and bucket reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .curriculum import Curriculum, PacingSchedule, curriculum_train
from .errors import ConfigError, InputError

SCENARIOS = ("not_seen", "first_seen", "last_seen", "random")


@dataclass
class MemorizationResult:
    """Trained model's true-class probability on each holdout sample."""

    scenario: str
    probabilities: np.ndarray
    quartiles: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        q1, q2, q3 = np.percentile(self.probabilities, [25, 50, 75])
        self.quartiles = (float(q1), float(q2), float(q3))

    @property
    def median(self) -> float:
        return self.quartiles[1]


@dataclass
class RocCurve:
    """Full threshold sweep: fpr/tpr are non-decreasing from (0,0) to (1,1)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _scenario_order(
    base_order: np.ndarray,
    holdout: np.ndarray,
    scenario: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Epoch order for one memorization scenario.

    Holdout samples keep their relative curriculum order; the remaining
    samples keep theirs. first_seen/last_seen put the holdout block at the
    start/end of every epoch's order, random scatters it at seeded
    positions, not_seen drops it entirely.
    """
    hold = set(int(i) for i in holdout)
    held = np.array([i for i in base_order if int(i) in hold], dtype=np.int64)
    rest = np.array([i for i in base_order if int(i) not in hold], dtype=np.int64)
    if scenario == "not_seen":
        return rest
    if scenario == "first_seen":
        return np.concatenate([held, rest])
    if scenario == "last_seen":
        return np.concatenate([rest, held])
    if scenario == "random":
        order = np.concatenate([held, rest])
        slots = rng.permutation(len(order))
        out = np.empty(len(order), dtype=np.int64)
        out[np.sort(slots[: len(held)])] = held
        out[np.sort(slots[len(held) :])] = rest
        return out
    raise ConfigError(f"unknown scenario {scenario!r}")


def memorization_experiment(
    features: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    curriculum: Curriculum,
    holdout: np.ndarray,
    config: nn.TrainConfig,
    scenarios: tuple[str, ...] = SCENARIOS,
    hidden_dims: tuple[int, ...] = (256,),
    seed: int | None = None,
) -> dict[str, MemorizationResult]:
    """Train once per scenario and read the holdout's true-class probability.

    Every scenario trains with the same fixed order each epoch, sweeping
    the whole order in contiguous batches (degenerate pacing), so the
    seen scenarios consume exactly the same sample multiset and differ
    only in where the holdout sits. not_seen drops the holdout from
    training but is still evaluated on it.
    """
    holdout = np.asarray(holdout)
    if holdout.size == 0:
        raise ConfigError("holdout is empty")
    unknown = [s for s in scenarios if s not in SCENARIOS]
    if unknown:
        raise ConfigError(f"unknown scenarios {unknown}")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    results: dict[str, MemorizationResult] = {}
    for scenario in scenarios:
        order = _scenario_order(curriculum.order, holdout, scenario, rng)
        cur = Curriculum(
            scores=np.zeros(len(order)),
            order=np.arange(len(order)),
            mode="baseline",
            ranks=np.arange(1, len(order) + 1),
        )
        sched = PacingSchedule(
            n_samples=len(order),
            total_iterations=max(1, int(np.ceil(len(order) / config.batch_size))),
            start_fraction=1.0,
            growth=2.0,
            step_length=1,
        )
        dims = (features.shape[1], *hidden_dims, class_count)
        net = nn.init_network(dims, seed=config.seed, dtype=features.dtype)
        model, _ = curriculum_train(
            net, features[order], labels[order], cur, sched, config,
            batch_mode="sweep",
        )
        probs = nn.forward_batch(model, features[holdout])
        true_p = probs[np.arange(len(holdout)), labels[holdout]]
        results[scenario] = MemorizationResult(
            scenario=scenario, probabilities=np.asarray(true_p, dtype=np.float64)
        )
    return results


def knn_shapley(
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    k: int = 5,
) -> np.ndarray:
    """Closed-form Shapley values of training points under a KNN surrogate.

    For each validation point, training points are sorted by ascending
    Euclidean distance (ties broken by index) and valued by the recursion
    that starts at the farthest point and walks inward; the result is the
    mean over validation points.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    val_y = np.asarray(val_y)
    n = train_x.shape[0]
    if n == 0 or val_x.shape[0] == 0:
        raise ConfigError("train and validation splits must be nonempty")
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must lie in 1..{n}")
    values = np.zeros(n, dtype=np.float64)
    jj = np.arange(1, n)  # 1-based position of the nearer point in each pair
    coef = np.minimum(k, jj) / (k * jj)
    train_sq = (train_x**2).sum(axis=1)
    chunk = max(1, int(2e6 // max(n, 1)))
    for start in range(0, val_x.shape[0], chunk):
        vx = val_x[start : start + chunk]
        vy = val_y[start : start + chunk]
        sq = train_sq[None, :] - 2.0 * (vx @ train_x.T) + (vx**2).sum(axis=1)[:, None]
        for row, yv in enumerate(vy):
            order = np.argsort(sq[row], kind="stable")
            match = (train_y[order] == yv).astype(np.float64)
            s_sorted = np.empty(n, dtype=np.float64)
            s_sorted[-1] = match[-1] / n
            if n > 1:
                diffs = (match[:-1] - match[1:]) * coef
                s_sorted[:-1] = match[-1] / n + np.cumsum(diffs[::-1])[::-1]
            values[order] += s_sorted
    return values / val_x.shape[0]


def roc_and_tpr(
    scores: np.ndarray,
    truth: np.ndarray,
    fpr_grid: tuple[float, ...] = (0.001, 0.005, 0.01, 0.05, 0.1),
) -> tuple[RocCurve, list[dict]]:
    """Full-sweep ROC with trapezoid AUC and a TPR-at-FPR table.

    Samples sharing a score change verdict together (the sweep visits
    distinct score values only). Each requested FPR reports the TPR of
    the most permissive threshold whose FPR does not exceed it.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = int((~truth).sum())
    if n_pos == 0 or n_neg == 0:
        raise InputError("ROC needs both classes present in the truth labels")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    boundaries = np.concatenate([distinct, [len(scores) - 1]])
    tp = np.cumsum(sorted_truth)[boundaries]
    fp = np.cumsum(~sorted_truth)[boundaries]
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    thresholds = np.concatenate([[np.inf], sorted_scores[boundaries]])
    auc = float(np.trapezoid(tpr, fpr))
    curve = RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)

    table = []
    for f in fpr_grid:
        ok = fpr <= f
        table.append({"fpr": float(f), "tpr": float(tpr[ok].max()) if ok.any() else 0.0})
    return curve, table


def bucket_report(
    member_truth: np.ndarray,
    verdict_member: np.ndarray,
    member_confidence: np.ndarray,
    losses: np.ndarray,
    difficulty_levels: np.ndarray,
    n_levels: int = 10,
) -> dict:
    """Per-difficulty-level attack metrics over members plus a fixed
    non-member pool.

    Inputs are aligned arrays over the whole query set; member samples
    carry levels 0..n_levels-1 and every non-member carries level -1 (the
    pool reused for all levels). Emits per level: attack accuracy on that
    level's members plus the pool, mean member-class confidence of the
    level's members, mean non-member-class confidence of the pool, and
    min-max-normalized loss histograms for members vs non-members.
    Levels without members are reported as absent (None), not zero.
    """
    member_truth = np.asarray(member_truth, dtype=bool)
    verdict_member = np.asarray(verdict_member, dtype=bool)
    member_confidence = np.asarray(member_confidence, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    difficulty_levels = np.asarray(difficulty_levels)

    pool = ~member_truth
    pool_correct = int((~verdict_member[pool]).sum())
    pool_size = int(pool.sum())
    pool_conf = float(np.mean(1.0 - member_confidence[pool])) if pool_size else None

    lo, hi = losses.min(), losses.max()
    norm = (losses - lo) / (hi - lo) if hi > lo else np.zeros_like(losses)
    edges = np.linspace(0.0, 1.0, 21)
    member_hist = np.histogram(norm[member_truth], bins=edges)[0]
    nonmember_hist = np.histogram(norm[pool], bins=edges)[0]

    rows = []
    for level in range(n_levels):
        mask = member_truth & (difficulty_levels == level)
        count = int(mask.sum())
        if count == 0:
            rows.append(
                {"level": level, "n_members": 0, "accuracy": None,
                 "member_confidence": None, "nonmember_confidence": pool_conf}
            )
            continue
        correct = int(verdict_member[mask].sum()) + pool_correct
        rows.append(
            {
                "level": level,
                "n_members": count,
                "accuracy": correct / (count + pool_size),
                "member_confidence": float(np.mean(member_confidence[mask])),
                "nonmember_confidence": pool_conf,
            }
        )
    return {
        "levels": rows,
        "loss_hist_edges": edges.tolist(),
        "member_loss_hist": member_hist.tolist(),
        "nonmember_loss_hist": nonmember_hist.tolist(),
    }


def write_roc_csv(curve: RocCurve, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for f, t in zip(curve.fpr, curve.tpr):
            writer.writerow([repr(float(f)), repr(float(t))])


def write_tpr_table_csv(table: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for row in table:
            writer.writerow([repr(row["fpr"]), repr(row["tpr"])])


def write_bucket_csv(report: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["level", "n_members", "accuracy", "member_confidence",
             "nonmember_confidence"]
        )
        for row in report["levels"]:
            writer.writerow(
                [row["level"], row["n_members"],
                 "" if row["accuracy"] is None else repr(row["accuracy"]),
                 "" if row["member_confidence"] is None
                 else repr(row["member_confidence"]),
                 "" if row["nonmember_confidence"] is None
                 else repr(row["nonmember_confidence"])]
            )
