"""Ordinal labeling, department clustering, and leakage-free encoding.

Shows the three data-preparation steps between raw daily fire counts
and a model-ready table: exact 1-D k-means over positive days, DTW
k-medoids over departmental fire-count series, and ordered target
encoding of a categorical column.
"""

import numpy as np

from firerisk import clustering, encoding, labeling

rng = np.random.default_rng(3)

# --- ordinal labels -------------------------------------------------------
# daily fire counts for one department: mostly zero, a few busy days
counts = np.where(rng.random(200) < 0.15, rng.poisson(3, 200) + 1, 0)
model = labeling.fit_ordinal_model(counts[counts > 0])
print("class centroids (positive days only):",
      [round(c, 2) for c in model.centroids])

classes = labeling.assign_label(counts, model)
for c in range(5):
    print(f"  class {c}: {int((classes == c).sum())} days")

# past-risk feature: causal kernel over the label history
h = labeling.kernel_half_width(4.0)
risk = labeling.past_risk_feature(classes, h)
busiest = int(np.argmax(classes))
print(f"busiest day index {busiest}: label {classes[busiest]}, "
      f"past-risk before it {risk[busiest]:.2f}, after it {risk[busiest + 1]:.2f}")
print()

# --- department clustering ------------------------------------------------
t = np.arange(365, dtype=float)
summer = np.clip(np.sin((t - 60) / 365 * 2 * np.pi), 0, None)
series = {}
for i in range(3):
    series[f"D0{i + 1}"] = rng.poisson(4 * summer) + 0.0   # summer regime
    series[f"D0{i + 4}"] = rng.poisson(0.4, 365) + 0.0      # flat low activity
assign = clustering.cluster_departments(series, k=2, seed=7, window=30)
print("cluster assignment (medoids:", assign.medoids, ")")
for dep in sorted(assign.labels):
    print(f"  {dep}: cluster {assign.labels[dep]}")
print()

# --- ordered target encoding ----------------------------------------------
# encode a category using only what was known strictly before each row
cats = rng.choice(["coastal", "inland", "mountain"], 12)
y = rng.poisson(np.where(cats == "coastal", 4.0, 1.0)).astype(float)
enc, enc_model = encoding.ordered_target_encode(cats, y, a=1.0, prior=y.mean())
print(f"{'row':>3} {'category':>9} {'target':>6} {'encoding':>8}")
for k in range(12):
    print(f"{k:>3} {cats[k]:>9} {y[k]:>6.0f} {enc[k]:>8.3f}")
print("unseen category at inference gets the prior:",
      round(encoding.apply_encoder(["island"], enc_model)[0], 3))
