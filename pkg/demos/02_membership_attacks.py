"""Run the membership-inference suite against an overfit classifier.

The attacker trains a shadow model on its own data, learns what "member"
posteriors look like (top-3 features), and also derives per-class metric
thresholds and a label-only robustness threshold from the shadow. Every
attack then queries the real target on a balanced member/non-member set.
"""

import numpy as np

from clprivacy import analysis, data, mia, nn

ds = data.synth_tabular(n_samples=2400, n_features=80, class_count=10,
                        flip_noise=0.2, cluster_spread=0.05, seed=1)
splits = data.split(ds, data.SplitPlan(
    {"target_train": 1 / 3, "shadow_train": 1 / 3, "test": 1 / 3}, seed=1
))
tr, sh, te = splits["target_train"], splits["shadow_train"], splits["test"]
X, y = ds.features, ds.labels
cfg = nn.TrainConfig(epochs=120, batch_size=64, learning_rate=0.1, seed=1)

print("training target and shadow...")
target, _ = nn.train(nn.init_network((80, 64, 10), seed=2), X[tr], y[tr], cfg)
print(f"  target train acc {nn.accuracy(target, X[tr], y[tr]):.3f}, "
      f"test acc {nn.accuracy(target, X[te], y[te]):.3f}")

knowledge = mia.AdversaryKnowledge(X[sh], y[sh], ds.class_count)
shadow = mia.train_shadows(knowledge, 1, cfg, hidden_dims=(64,))[0]
attack = mia.nn_attack_train([shadow], knowledge, seed=3)

n_q = min(len(tr), len(te))
qx = np.concatenate([X[tr][:n_q], X[te][:n_q]])
qy = np.concatenate([y[tr][:n_q], y[te][:n_q]])
truth = np.concatenate([np.ones(n_q, bool), np.zeros(n_q, bool)])

print(f"\n{'attack':<14} {'accuracy':>8} {'auc':>7}  tpr@fpr=0.01")
rows = {
    "nn-top3": mia.nn_attack_infer_batch(attack, target, qx),
    "metric-corr": mia.metric_attack("corr", target, shadow, knowledge, qx, qy),
    "metric-conf": mia.metric_attack("conf", target, shadow, knowledge, qx, qy),
    "metric-ent": mia.metric_attack("ent", target, shadow, knowledge, qx, qy),
    "metric-ment": mia.metric_attack("ment", target, shadow, knowledge, qx, qy),
    "label-only": mia.label_only_attack(target, qx, shadow, knowledge, seed=4),
}
for name, verdicts in rows.items():
    pred = np.array([v.is_member for v in verdicts])
    raw = np.array([v.raw_score for v in verdicts])
    curve, table = analysis.roc_and_tpr(raw, truth, (0.01,))
    print(f"{name:<14} {np.mean(pred == truth):>8.3f} {curve.auc:>7.3f}  "
          f"{table[0]['tpr']:.3f}")
print("\nan overfit target leaks: every posterior-based attack should sit")
print("comfortably above the 0.5 coin-flip line.")
