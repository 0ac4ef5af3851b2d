"""Defense-side mechanisms: DP-SGD configs, noisy curricula, and a
MemGuard-style inference-time posterior perturbation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .curriculum import Curriculum, build_curriculum, score_difficulty
from .errors import ConfigError, InputError
from .mia import AttackModel, topk_features


@dataclass
class DefenseConfig:
    kind: str = "none"  # none | dp_sgd | dp_sgd_star | memguard
    dp_clip: float | None = None
    dp_noise: float | None = None
    memguard_budget: float | None = None

    def validate(self) -> None:
        if self.kind not in ("none", "dp_sgd", "dp_sgd_star", "memguard"):
            raise ConfigError(f"unknown defense kind {self.kind!r}")
        if self.kind in ("dp_sgd", "dp_sgd_star"):
            if self.dp_clip is None or self.dp_noise is None:
                raise ConfigError(f"{self.kind} needs dp_clip and dp_noise")
            if self.dp_clip <= 0 or self.dp_noise < 0:
                raise ConfigError("dp_clip must be > 0 and dp_noise >= 0")
        if self.kind == "memguard":
            if self.memguard_budget is None or self.memguard_budget < 0:
                raise ConfigError("memguard needs a nonnegative budget")


def dpstar_curriculum(
    features: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    config: nn.TrainConfig,
    mode: str = "bootstrap",
    hidden_dims: tuple[int, ...] = (256,),
    seed: int | None = None,
) -> Curriculum:
    """Noisy curriculum: the difficulty measurer itself trains under DP-SGD.

    The resulting (noisier) scores feed the ordinary curriculum builder,
    so ranks degrade gracefully as the noise multiplier grows.
    """
    if config.optimizer != "dp_sgd":
        raise ConfigError("dpstar curriculum needs a dp_sgd training config")
    scores = score_difficulty(
        features, labels, class_count,
        method="bootstrap", config=config, hidden_dims=hidden_dims,
    )
    return build_curriculum(scores, mode, seed=config.seed if seed is None else seed)


def _attack_member_posterior(defender: AttackModel, posterior: np.ndarray) -> float:
    feats = topk_features(posterior[None, :], defender.k)
    return float(nn.forward_batch(defender.network, feats)[0, 1])


def _flat_target(posterior: np.ndarray, argmax: int) -> np.ndarray:
    """Flattest label-preserving posterior: near-uniform with the argmax
    coordinate keeping a small winning margin."""
    k = posterior.shape[0]
    if k == 1:
        return posterior.copy()
    eps = 1e-3
    flat = np.full(k, (1.0 - (1.0 / k + eps)) / (k - 1))
    flat[argmax] = 1.0 / k + eps
    return flat


def memguard_perturb(
    posterior: np.ndarray,
    defender: AttackModel,
    budget: float,
    grid: int = 64,
    refine_iters: int = 24,
) -> np.ndarray:
    """Best-effort label-preserving perturbation that pushes the defender's
    local attack copy toward an uninformative member posterior.

    Runs a line search along the blend from the posterior toward its
    flattest label-preserving counterpart, with bisection refinement
    around every crossing of 0.5. Among candidates whose attack member
    posterior lands at or below 0.5 the closest to 0.5 wins, so defended
    outputs read as non-member whenever that side is reachable; otherwise
    the overall closest wins. The original argmax never changes, the
    output stays on the simplex, the distance to 0.5 never increases, and
    the L1 distance from the input never exceeds the budget. Returns the
    input unchanged when no candidate improves on it.
    """
    posterior = np.asarray(posterior, dtype=np.float64)
    if budget < 0:
        raise InputError("budget must be nonnegative")
    if posterior.ndim != 1:
        raise InputError("memguard_perturb takes a single posterior vector")
    if budget == 0 or posterior.shape[0] == 1:
        return posterior.copy()

    argmax = int(np.argmax(posterior))
    flat = _flat_target(posterior, argmax)
    direction = flat - posterior
    span = np.abs(direction).sum()
    if span == 0:
        return posterior.copy()
    t_max = min(1.0, budget / span)

    def candidate(t: float) -> np.ndarray:
        p = posterior + t * direction
        p = np.clip(p, 0.0, None)
        return p / p.sum()

    evals: list[tuple[float, float]] = []  # (t, attack member posterior)
    for t in np.linspace(0.0, t_max, grid):
        p = candidate(float(t))
        if np.argmax(p) == argmax:
            evals.append((float(t), _attack_member_posterior(defender, p)))

    # Bisection around every sign change of (m - 0.5) along the blend.
    refined: list[tuple[float, float]] = []
    for (t0, m0), (t1, m1) in zip(evals[:-1], evals[1:]):
        if (m0 - 0.5) * (m1 - 0.5) <= 0 and m0 != m1:
            lo, hi, mlo = t0, t1, m0
            for _ in range(refine_iters):
                mid = 0.5 * (lo + hi)
                p = candidate(mid)
                if np.argmax(p) != argmax:
                    break
                m = _attack_member_posterior(defender, p)
                refined.append((mid, m))
                if (mlo - 0.5) * (m - 0.5) <= 0:
                    hi = mid
                else:
                    lo, mlo = mid, m

    m_orig = evals[0][1]  # t = 0 is always a valid candidate
    base_dist = abs(m_orig - 0.5)
    candidates = evals + refined
    below = [(t, m) for t, m in candidates if m <= 0.5 and abs(m - 0.5) <= base_dist]
    pool = below if below else candidates
    t_best, m_best = min(pool, key=lambda tm: abs(tm[1] - 0.5))
    if abs(m_best - 0.5) >= base_dist and not (below and m_orig > 0.5):
        return posterior.copy()
    best = candidate(t_best)
    if np.argmax(best) != argmax or np.abs(best - posterior).sum() > budget + 1e-9:
        return posterior.copy()
    return best


def memguard_batch(
    posteriors: np.ndarray, defender: AttackModel, budget: float
) -> np.ndarray:
    """memguard_perturb applied row-wise."""
    return np.stack([memguard_perturb(p, defender, budget) for p in posteriors])


def write_perturbation_log(
    path: str, original: np.ndarray, perturbed: np.ndarray
) -> None:
    """Optional audit log: per query, L1 perturbation size and both argmaxes."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query", "l1_perturbation", "argmax_before", "argmax_after"])
        for i, (a, b) in enumerate(zip(original, perturbed)):
            writer.writerow(
                [i, repr(float(np.abs(b - a).sum())),
                 int(np.argmax(a)), int(np.argmax(b))]
            )
