"""Membership-inference attack suite.

Covers shadow-model training, the NN-based black-box-top3 attack, four
metric-based attacks (correctness, confidence, entropy, modified entropy),
a label-only attack realized through prediction robustness under input
noise, calibrated membership scores, and the difficulty-calibrated attack
that adapts its decision threshold to each sample's difficulty rank.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .curriculum import Curriculum
from .errors import ConfigError, InputError

THETA_FLOOR = 1e-4  # initial per-sample threshold; hardest samples compare to it
THETA_GRID_MAX = 0.1
THETA_GRID_STEP = 1e-3

ATTACK_EPOCHS = 100
ATTACK_LR = 0.01


@dataclass
class AdversaryKnowledge:
    """What the attacker holds: a shadow split drawn from the target's data
    distribution, and the access model (posterior vectors or labels only)."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    access: str = "posterior"  # "posterior" | "label_only"


@dataclass
class Shadow:
    """A shadow model plus its recorded member / non-member index sets
    (indices into the adversary's shadow split)."""

    model: nn.Network
    member_idx: np.ndarray
    nonmember_idx: np.ndarray


@dataclass
class AttackModel:
    """Small member/non-member classifier over attack features."""

    network: nn.Network
    feature_kind: str  # "topk_posteriors" | "calibrated_score"
    k: int = 3


@dataclass
class MembershipVerdict:
    is_member: bool
    confidence: float  # posterior of the predicted class
    raw_score: float  # continuous member-leaning score, for ROC sweeps


@dataclass
class DiffCaliState:
    """Frozen state of the difficulty-calibrated attack.

    curriculum ranks the attack-training split D; new query points are
    ranked against D by their mean reference-model loss (the same
    difficulty signal the curriculum was built from), which reports flag
    as an attacker-estimated rank.
    """

    theta0: float
    curriculum: Curriculum
    floor: float = THETA_FLOOR
    sorted_scores: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.sorted_scores is None:
            self.sorted_scores = np.sort(self.curriculum.scores)
        if not self.floor <= self.theta0 <= THETA_GRID_MAX:
            raise ConfigError(f"theta0 must lie in [{self.floor}, {THETA_GRID_MAX}]")


def train_shadows(
    knowledge: AdversaryKnowledge,
    count: int,
    config: nn.TrainConfig,
    hidden_dims: tuple[int, ...] = (256,),
) -> list[Shadow]:
    """Train shadow models, each on its own random half of the shadow split.

    Shadows use the same architecture and training configuration as the
    target; shadow i derives its half-split and training seed from
    config.seed + i, so runs are reproducible.
    """
    n = knowledge.features.shape[0]
    if count < 1:
        raise ConfigError("shadow count must be >= 1")
    if n < 4:
        raise ConfigError("shadow split too small to carve member halves")
    dims = (knowledge.features.shape[1], *hidden_dims, knowledge.class_count)
    shadows = []
    for i in range(count):
        seed = config.seed + i
        perm = np.random.default_rng(seed).permutation(n)
        members, nonmembers = np.sort(perm[: n // 2]), np.sort(perm[n // 2 :])
        net = nn.init_network(dims, seed=seed, dtype=knowledge.features.dtype)
        cfg = nn.TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            optimizer=config.optimizer,
            dp_clip=config.dp_clip,
            dp_noise=config.dp_noise,
            seed=seed,
        )
        model, _ = nn.train(
            net, knowledge.features[members], knowledge.labels[members], cfg
        )
        shadows.append(
            Shadow(model=model, member_idx=members, nonmember_idx=nonmembers)
        )
    return shadows


def topk_features(posterior: np.ndarray, k: int = 3) -> np.ndarray:
    """The k largest posterior entries, sorted descending."""
    posterior = np.asarray(posterior)
    if not 1 <= k <= posterior.shape[-1]:
        raise InputError(f"k={k} invalid for {posterior.shape[-1]} classes")
    return np.sort(posterior, axis=-1)[..., ::-1][..., :k]


def _train_attack_net(
    features: np.ndarray,
    labels: np.ndarray,
    seed: int,
    epochs: int = ATTACK_EPOCHS,
    lr: float = ATTACK_LR,
    hidden: tuple[int, int] = (64, 32),
) -> nn.Network:
    """Fit the 2-output attack classifier (cross-entropy, plain SGD)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if len(np.unique(labels)) < 2:
        raise ConfigError("attack training labels are all one class")
    net = nn.init_network((features.shape[1], *hidden, 2), seed=seed)
    cfg = nn.TrainConfig(
        epochs=epochs, batch_size=128, learning_rate=lr, optimizer="sgd", seed=seed
    )
    model, _ = nn.train(net, features, labels, cfg)
    return model


def nn_attack_train(
    shadows: list[Shadow],
    knowledge: AdversaryKnowledge,
    k: int = 3,
    seed: int = 0,
) -> AttackModel:
    """Train the NN-based attack on top-k posterior features.

    Every shadow contributes its members (label 1) and non-members
    (label 0); the halves are equal sized, so classes stay balanced.
    """
    if not shadows:
        raise ConfigError("need at least one shadow model")
    feats, labels = [], []
    for shadow in shadows:
        post_m = nn.forward_batch(shadow.model, knowledge.features[shadow.member_idx])
        post_n = nn.forward_batch(
            shadow.model, knowledge.features[shadow.nonmember_idx]
        )
        feats.append(topk_features(post_m, k))
        feats.append(topk_features(post_n, k))
        labels.append(np.ones(len(post_m), dtype=np.int64))
        labels.append(np.zeros(len(post_n), dtype=np.int64))
    network = _train_attack_net(np.concatenate(feats), np.concatenate(labels), seed)
    return AttackModel(network=network, feature_kind="topk_posteriors", k=k)


def _verdicts_from_posteriors(member_post: np.ndarray) -> list[MembershipVerdict]:
    """Argmax decision; a tie at exactly 0.5 counts as non-member."""
    out = []
    for p in member_post:
        is_member = p > 0.5
        conf = p if is_member else 1.0 - p
        out.append(MembershipVerdict(bool(is_member), float(conf), float(p)))
    return out


def nn_attack_infer_from_posteriors(
    attack: AttackModel, posteriors: np.ndarray
) -> list[MembershipVerdict]:
    """Verdicts from already-computed target posteriors (e.g. defended ones)."""
    feats = topk_features(np.asarray(posteriors), attack.k)
    member_post = nn.forward_batch(attack.network, feats)[:, 1]
    return _verdicts_from_posteriors(member_post)


def nn_attack_infer_batch(
    attack: AttackModel,
    target: nn.Network,
    x: np.ndarray,
    true_labels: np.ndarray | None = None,
) -> list[MembershipVerdict]:
    """Verdicts for a batch of query samples against the target model."""
    del true_labels  # top-k features need only the posterior
    return nn_attack_infer_from_posteriors(attack, nn.forward_batch(target, x))


def nn_attack_infer(
    attack: AttackModel,
    target: nn.Network,
    x: np.ndarray,
    true_label: int | None = None,
) -> MembershipVerdict:
    return nn_attack_infer_batch(attack, target, np.asarray(x)[None, :])[0]


# ---------------------------------------------------------------------------
# Metric-based attacks


def entropy_score(posterior: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(posterior), nn.PROB_FLOOR, None)
    return -(p * np.log(p)).sum(axis=-1)


def modified_entropy_score(posterior: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """-(1-p_y) log p_y - sum_{i != y} p_i log(1 - p_i); 0 when exactly right."""
    p = np.clip(np.asarray(posterior), nn.PROB_FLOOR, 1.0 - nn.PROB_FLOOR)
    idx = np.arange(p.shape[0])
    py = p[idx, labels]
    others = (p * np.log(1.0 - p)).sum(axis=-1) - py * np.log(1.0 - py)
    return -(1.0 - py) * np.log(py) - others


def best_threshold(
    scores: np.ndarray, member_mask: np.ndarray, member_if_low: bool = False
) -> float:
    """Threshold maximizing attack accuracy, found by sweeping every
    candidate cut point (the distinct scores plus +/- infinity).

    Decision rule: member iff score >= t (or <= t when member_if_low).
    Accuracy ties break toward the smallest candidate.
    """
    scores = np.asarray(scores, dtype=np.float64)
    member_mask = np.asarray(member_mask, dtype=bool)
    candidates = np.concatenate([[-np.inf], np.unique(scores), [np.inf]])
    best_t, best_acc = candidates[0], -1.0
    for t in candidates:
        pred = scores <= t if member_if_low else scores >= t
        acc = float(np.mean(pred == member_mask))
        if acc > best_acc:
            best_acc, best_t = acc, float(t)
    return best_t


def losses_from_posteriors(posteriors: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cross-entropy loss implied by posterior vectors (clamped)."""
    p = np.clip(np.asarray(posteriors), nn.PROB_FLOOR, None)
    return -np.log(p[np.arange(len(y)), np.asarray(y)])


def _metric_scores(
    mode: str,
    model: nn.Network,
    x: np.ndarray,
    y: np.ndarray,
    posteriors: np.ndarray | None = None,
) -> np.ndarray:
    posts = nn.forward_batch(model, x) if posteriors is None else posteriors
    y = np.asarray(y)
    if mode == "conf":
        return posts[np.arange(len(y)), y]
    if mode == "ent":
        return entropy_score(posts)
    if mode == "ment":
        return modified_entropy_score(posts, y)
    raise ConfigError(f"unknown metric mode {mode!r}")


def metric_attack(
    mode: str,
    target: nn.Network,
    shadow: Shadow | None,
    knowledge: AdversaryKnowledge | None,
    query_x: np.ndarray,
    query_y: np.ndarray,
    query_posteriors: np.ndarray | None = None,
) -> list[MembershipVerdict]:
    """Metric-based attacks: corr, conf, ent, ment.

    corr predicts member iff the target classifies the query correctly and
    needs no shadow. The score-based modes pick one threshold per class on
    the shadow model's member/non-member scores (maximizing shadow attack
    accuracy) and fall back to a global threshold for classes the shadow
    split never saw. conf treats high scores as member-like; ent and ment
    treat low scores as member-like.
    """
    query_y = np.asarray(query_y)
    if mode == "corr":
        preds = (
            nn.predict(target, query_x)
            if query_posteriors is None
            else np.argmax(query_posteriors, axis=1)
        )
        correct = preds == query_y
        return [MembershipVerdict(bool(c), 1.0, float(c)) for c in correct]
    if mode not in ("conf", "ent", "ment"):
        raise ConfigError(f"unknown metric mode {mode!r}")
    if shadow is None or knowledge is None:
        raise ConfigError(f"metric-{mode} needs shadow data for thresholds")
    member_if_low = mode in ("ent", "ment")

    idx = np.concatenate([shadow.member_idx, shadow.nonmember_idx])
    membership = np.concatenate(
        [np.ones(len(shadow.member_idx), bool),
         np.zeros(len(shadow.nonmember_idx), bool)]
    )
    sx, sy = knowledge.features[idx], knowledge.labels[idx]
    shadow_scores = _metric_scores(mode, shadow.model, sx, sy)

    global_t = best_threshold(shadow_scores, membership, member_if_low)
    thresholds = {}
    for cls in np.unique(query_y):
        mask = sy == cls
        if mask.any():
            thresholds[int(cls)] = best_threshold(
                shadow_scores[mask], membership[mask], member_if_low
            )
        else:
            thresholds[int(cls)] = global_t

    scores = _metric_scores(mode, target, query_x, query_y, query_posteriors)
    out = []
    for s, cls in zip(scores, query_y):
        t = thresholds[int(cls)]
        is_member = bool(s <= t) if member_if_low else bool(s >= t)
        raw = -float(s) if member_if_low else float(s)
        out.append(MembershipVerdict(is_member, 1.0, raw))
    return out


# ---------------------------------------------------------------------------
# Label-only attack (noise-robustness variant)


def robustness_scores(
    model: nn.Network,
    x: np.ndarray,
    noise_grid: tuple[float, ...],
    trials: int,
    seed: int,
    perturbation: str = "auto",
) -> np.ndarray:
    """Fraction of perturbed copies that keep the model's predicted label,
    averaged over the noise grid.

    Binary 0/1 features get independent bit flips at each grid rate;
    anything else gets additive Gaussian noise with the grid value as its
    standard deviation. perturbation "auto" picks per the data.
    """
    if len(noise_grid) == 0:
        raise ConfigError("noise grid must be nonempty")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if perturbation == "auto":
        binary = np.isin(x, (0.0, 1.0)).all()
        perturbation = "flip" if binary else "gaussian"
    if perturbation not in ("flip", "gaussian"):
        raise ConfigError(f"unknown perturbation {perturbation!r}")
    rng = np.random.default_rng(seed)
    base_pred = nn.predict(model, x)
    keep = np.zeros(x.shape[0], dtype=np.float64)
    for level in noise_grid:
        for _ in range(trials):
            if level == 0:
                noisy = x
            elif perturbation == "flip":
                flips = rng.random(x.shape) < level
                noisy = np.abs(x - flips)
            else:
                noisy = x + rng.normal(0.0, level, size=x.shape)
            keep += nn.predict(model, noisy) == base_pred
    return keep / (len(noise_grid) * trials)


def label_only_attack(
    target: nn.Network,
    query_x: np.ndarray,
    shadow: Shadow,
    knowledge: AdversaryKnowledge,
    noise_grid: tuple[float, ...] = (0.02, 0.05, 0.1),
    trials: int = 8,
    seed: int = 0,
    perturbation: str = "auto",
) -> list[MembershipVerdict]:
    """Label-only attack: member iff the prediction is robust to noise.

    The decision threshold is fit on the shadow model's robustness scores
    over its member/non-member split.
    """
    idx = np.concatenate([shadow.member_idx, shadow.nonmember_idx])
    membership = np.concatenate(
        [np.ones(len(shadow.member_idx), bool),
         np.zeros(len(shadow.nonmember_idx), bool)]
    )
    shadow_scores = robustness_scores(
        shadow.model, knowledge.features[idx], noise_grid, trials, seed, perturbation
    )
    threshold = best_threshold(shadow_scores, membership, member_if_low=False)
    scores = robustness_scores(
        target, query_x, noise_grid, trials, seed + 1, perturbation
    )
    return [MembershipVerdict(bool(s >= threshold), 1.0, float(s)) for s in scores]


# ---------------------------------------------------------------------------
# Calibrated scores and the difficulty-calibrated attack


def membership_scores(model: nn.Network, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Membership score s(model, x) = -loss(model, x); higher = member-like."""
    return -nn.per_sample_loss(model, x, y)


def calibrated_score_from_losses(
    target_loss: float | np.ndarray, shadow_losses: np.ndarray
) -> float | np.ndarray:
    """Calibrated score: -target_loss minus the mean of -shadow_losses.

    Adding any constant to every model's loss cancels out, so the score
    reflects the target-specific part of a sample's hardness.
    """
    shadow_losses = np.asarray(shadow_losses, dtype=np.float64)
    return np.mean(shadow_losses, axis=0) - np.asarray(target_loss)


def calibrated_scores_batch(
    target: nn.Network,
    shadows: list[nn.Network],
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    if not shadows:
        raise ConfigError("calibrated scores need at least one reference model")
    t_loss = nn.per_sample_loss(target, x, y)
    s_loss = np.stack([nn.per_sample_loss(s, x, y) for s in shadows])
    return calibrated_score_from_losses(t_loss, s_loss)


def calibrated_score(
    target: nn.Network,
    shadows: list[nn.Network],
    x: np.ndarray,
    true_label: int,
) -> float:
    """Calibrated membership score for one sample."""
    return float(
        calibrated_scores_batch(
            target, shadows, np.asarray(x)[None, :], np.asarray([true_label])
        )[0]
    )


def threshold_for_rank(
    rank: np.ndarray | int, n: int, theta0: float, floor: float = THETA_FLOOR
) -> np.ndarray | float:
    """Per-sample decision threshold, linear in difficulty rank.

    Rank 1 (easiest) maps exactly to theta0 and rank n (hardest) exactly
    to the floor; intermediate ranks interpolate linearly, so more
    difficult samples face a lower bar to be called members.
    """
    if n < 1:
        raise InputError("rank scale needs n >= 1")
    r = np.asarray(rank)
    if np.any(r < 1) or np.any(r > n):
        raise InputError(f"ranks must lie in 1..{n}")
    if n == 1:
        theta = np.full(r.shape, float(theta0))
    else:
        t = (n - r) / (n - 1)
        theta = floor + t * (theta0 - floor)
        theta = np.where(r == 1, theta0, theta)
        theta = np.where(r == n, floor, theta)
    return float(theta) if np.isscalar(rank) else theta


def search_theta0(
    member_post: np.ndarray,
    ranks: np.ndarray,
    membership: np.ndarray,
    n: int,
    grid_step: float = THETA_GRID_STEP,
) -> float:
    """Grid-search theta0 in [0, 0.1] maximizing thresholded accuracy.

    The returned value is clamped up to the threshold floor so the range
    [floor, theta0] stays well formed. Accuracy ties break toward the
    smallest candidate.
    """
    candidates = np.arange(0.0, THETA_GRID_MAX + grid_step / 2, grid_step)
    membership = np.asarray(membership, dtype=bool)
    best_t, best_acc = float(candidates[0]), -1.0
    for cand in candidates:
        theta = threshold_for_rank(ranks, n, max(float(cand), THETA_FLOOR))
        acc = float(np.mean((member_post >= theta) == membership))
        if acc > best_acc:
            best_acc, best_t = acc, float(cand)
    return max(best_t, THETA_FLOOR)


def diffcali_train(
    target: nn.Network,
    references: list[nn.Network],
    d_features: np.ndarray,
    d_labels: np.ndarray,
    d_membership: np.ndarray,
    attacker_curriculum: Curriculum,
    epochs: int = ATTACK_EPOCHS,
    seed: int = 0,
) -> tuple[AttackModel, DiffCaliState]:
    """Train the difficulty-calibrated attack (scalar calibrated-score input).

    The caller supplies a model in the target slot whose membership ground
    truth over D is known; in the attacker pipeline that is a shadow model
    standing in for the real target, with the remaining shadows acting as
    the reference models (the same references must be passed at inference).

    Each epoch grid-searches theta0 under the per-sample rank thresholds
    using the current attack model, then trains the attack model for one
    epoch on (score, membership). The calibrated scores themselves are
    loop-invariant (all scoring models are frozen here), so they are
    computed once up front. A final search with the fully trained model
    fixes the deployed theta0.
    """
    d_membership = np.asarray(d_membership, dtype=bool)
    n = d_features.shape[0]
    if attacker_curriculum.n_samples != n:
        raise ConfigError("attacker curriculum must rank the whole split D")
    if n < 2:
        raise ConfigError("difficulty calibration needs |D| >= 2")
    if d_membership.all() or not d_membership.any():
        raise ConfigError("membership labels for D are all one class")

    s_cal = calibrated_scores_batch(target, references, d_features, d_labels)
    ranks = attacker_curriculum.ranks
    labels = d_membership.astype(np.int64)
    feats = s_cal[:, None]

    net = nn.init_network((1, 64, 32, 2), seed=seed)
    rng = np.random.default_rng(seed)
    batch_size = 128
    theta0 = THETA_FLOOR
    for _ in range(epochs):
        member_post = nn.forward_batch(net, feats)[:, 1]
        theta0 = search_theta0(member_post, ranks, d_membership, n)
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            _, grads = nn.loss_and_grad(net, feats[idx], labels[idx])
            net = nn.sgd_step(net, grads, ATTACK_LR)
    member_post = nn.forward_batch(net, feats)[:, 1]
    theta0 = search_theta0(member_post, ranks, d_membership, n)

    attack = AttackModel(network=net, feature_kind="calibrated_score", k=1)
    state = DiffCaliState(theta0=theta0, curriculum=attacker_curriculum)
    return attack, state


def _ranks_against(state: DiffCaliState, scores: np.ndarray) -> np.ndarray:
    """Rank query difficulty scores against the attack split's scores."""
    pos = np.searchsorted(state.sorted_scores, scores, side="left")
    return np.clip(pos + 1, 1, state.curriculum.n_samples)


def diffcali_infer_batch(
    attack: AttackModel,
    state: DiffCaliState,
    target: nn.Network,
    references: list[nn.Network],
    x: np.ndarray,
    y: np.ndarray,
    target_losses: np.ndarray | None = None,
) -> list[MembershipVerdict]:
    """Difficulty-calibrated verdicts for a batch of queries.

    A query is a member iff the attack model's member posterior reaches
    its per-sample threshold (ties count as member); raw_score is the
    posterior minus the threshold so ROC sweeps respect the calibration.
    target_losses overrides the target-side losses, e.g. with ones implied
    by defended posteriors.
    """
    if attack.feature_kind != "calibrated_score":
        raise ConfigError("attack model was not trained on calibrated scores")
    if not references:
        raise ConfigError("calibrated inference needs at least one reference model")
    ref_losses = np.stack([nn.per_sample_loss(r, x, y) for r in references])
    t_loss = (
        nn.per_sample_loss(target, x, y) if target_losses is None else target_losses
    )
    s_cal = calibrated_score_from_losses(t_loss, ref_losses)
    ref_loss = ref_losses.mean(axis=0)
    ranks = _ranks_against(state, ref_loss)
    theta = threshold_for_rank(
        ranks, state.curriculum.n_samples, state.theta0, state.floor
    )
    member_post = nn.forward_batch(attack.network, s_cal[:, None])[:, 1]
    out = []
    for p, th in zip(member_post, theta):
        is_member = bool(p >= th)
        conf = float(p if is_member else 1.0 - p)
        out.append(MembershipVerdict(is_member, conf, float(p - th)))
    return out


def diffcali_infer(
    attack: AttackModel,
    state: DiffCaliState,
    target: nn.Network,
    references: list[nn.Network],
    x: np.ndarray,
    true_label: int,
) -> MembershipVerdict:
    return diffcali_infer_batch(
        attack, state, target, references,
        np.asarray(x)[None, :], np.asarray([true_label]),
    )[0]


def write_verdicts_csv(
    path: str,
    verdicts: list[MembershipVerdict],
    sample_indices: np.ndarray,
    truth: np.ndarray,
    difficulty_levels: np.ndarray | None = None,
) -> None:
    """Verdict export consumed by the analysis module.

    difficulty_level is -1 for samples outside the bucketed member pool.
    """
    levels = (
        difficulty_levels
        if difficulty_levels is not None
        else np.full(len(verdicts), -1, dtype=np.int64)
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_index", "is_member_truth", "verdict", "confidence",
             "raw_score", "difficulty_level"]
        )
        for i, v, t, lv in zip(sample_indices, verdicts, truth, levels):
            writer.writerow(
                [int(i), int(t), int(v.is_member), repr(v.confidence),
                 repr(v.raw_score), int(lv)]
            )
