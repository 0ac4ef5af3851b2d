"""How the position of difficult samples in the epoch order drives
memorization, with KNN-Shapley valuation alongside.

Four trainings share one fixed order per epoch and differ only in where
the most difficult 4% of samples sit: dropped entirely (not_seen), first,
last, or scattered randomly. The trained model's probability on those
samples' true classes measures how well they were memorized.
"""

import numpy as np

from clprivacy import analysis, curriculum as cl, data, nn

ds = data.synth_tabular(n_samples=2000, n_features=60, class_count=8,
                        flip_noise=0.2, cluster_spread=0.06, seed=9)
X, y = ds.features, ds.labels
cfg = nn.TrainConfig(epochs=80, batch_size=64, learning_rate=0.1, seed=9)

print("scoring difficulty with a bootstrap measurer...")
scores = cl.score_difficulty(X, y, ds.class_count, method="bootstrap",
                             config=cfg, hidden_dims=(48,))
curriculum = cl.build_curriculum(scores, "bootstrap")
holdout = data.top_difficult_holdout(curriculum, q=0.04)
print(f"  holdout = {len(holdout)} most difficult samples")

results = analysis.memorization_experiment(
    X, y, ds.class_count, curriculum, holdout, cfg, hidden_dims=(48,)
)
print(f"\n{'scenario':<12} {'q1':>7} {'median':>7} {'q3':>7}")
for name in ("not_seen", "first_seen", "random", "last_seen"):
    q1, q2, q3 = results[name].quartiles
    print(f"{name:<12} {q1:>7.3f} {q2:>7.3f} {q3:>7.3f}")
print("\nseeing the holdout at all should beat not_seen, and last_seen")
print("(freshest gradients at the end of every epoch) memorizes hardest.")

print("\nKNN-Shapley valuation of the training samples...")
values = analysis.knn_shapley(X[:1000], y[:1000], X[1000:1400], y[1000:1400], k=5)
order = np.argsort(values)
print(f"  value range [{values.min():.4f}, {values.max():.4f}], "
      f"sum {values.sum():.3f}")
hold_set = set(holdout.tolist())
low_value = set(order[:len(holdout)].tolist())
overlap = len(hold_set & low_value) / len(holdout)
print(f"  difficult-sample overlap with the least-valuable tail: {overlap:.2f}")
print("difficulty and (low) value correlate but measure different things.")
