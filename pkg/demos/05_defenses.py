"""Defense mechanisms and what they cost.

DP-SGD clips per-sample gradients and adds Gaussian noise, crushing the
membership signal together with the model's accuracy. The MemGuard-style
defense instead perturbs served posteriors at inference time: the label
never changes, but the defender's copy of the attack model is steered to
an uninformative output, pinning the attack near coin-flipping.
"""

import numpy as np

from clprivacy import data, defense, mia, nn

ds = data.synth_tabular(n_samples=2400, n_features=80, class_count=10,
                        flip_noise=0.2, cluster_spread=0.05, seed=11)
splits = data.split(ds, data.SplitPlan(
    {"target_train": 1 / 3, "shadow_train": 1 / 3, "test": 1 / 3}, seed=11
))
tr, sh, te = splits["target_train"], splits["shadow_train"], splits["test"]
X, y = ds.features, ds.labels
cfg = nn.TrainConfig(epochs=120, batch_size=64, learning_rate=0.1, seed=11)

print("undefended target + attacker...")
target, _ = nn.train(nn.init_network((80, 64, 10), seed=12), X[tr], y[tr], cfg)
knowledge = mia.AdversaryKnowledge(X[sh], y[sh], ds.class_count)
shadow = mia.train_shadows(knowledge, 1, cfg, hidden_dims=(64,))[0]
attack = mia.nn_attack_train([shadow], knowledge, seed=13)

n_q = min(len(tr), len(te))
qx = np.concatenate([X[tr][:n_q], X[te][:n_q]])
truth = np.concatenate([np.ones(n_q, bool), np.zeros(n_q, bool)])


def attack_accuracy(posteriors):
    verdicts = mia.nn_attack_infer_from_posteriors(attack, posteriors)
    return float(np.mean(np.array([v.is_member for v in verdicts]) == truth))


posts = nn.forward_batch(target, qx)
print(f"  target test acc {nn.accuracy(target, X[te], y[te]):.3f}, "
      f"nn attack acc {attack_accuracy(posts):.3f}")

print("\nDP-SGD target (clip 1.0, noise multiplier 2.0)...")
dp_cfg = nn.TrainConfig(epochs=40, batch_size=64, learning_rate=0.05,
                        optimizer="dp_sgd", dp_clip=1.0, dp_noise=2.0, seed=12)
dp_target, _ = nn.train(nn.init_network((80, 64, 10), seed=12),
                        X[tr], y[tr], dp_cfg)
dp_posts = nn.forward_batch(dp_target, qx)
print(f"  target test acc {nn.accuracy(dp_target, X[te], y[te]):.3f}, "
      f"nn attack acc {attack_accuracy(dp_posts):.3f}  (both collapse)")

print("\nnoisy curriculum: difficulty measurer itself trained under DP-SGD...")
noisy = defense.dpstar_curriculum(X[tr], y[tr], ds.class_count, dp_cfg,
                                  hidden_dims=(64,))
clean_scores = nn.per_sample_loss(target, X[tr], y[tr])
from scipy.stats import spearmanr
rho = spearmanr(np.argsort(np.argsort(clean_scores)), noisy.ranks).statistic
print(f"  rank correlation with the clean curriculum: {rho:.3f}")

print("\nMemGuard-style posterior perturbation (defender reuses the attack)...")
defended = defense.memguard_batch(posts, attack, budget=1.0)
assert np.array_equal(defended.argmax(axis=1), posts.argmax(axis=1))
print(f"  predicted labels unchanged: True")
print(f"  nn attack acc after perturbation {attack_accuracy(defended):.3f} "
      f"(pinned near 0.5)")
