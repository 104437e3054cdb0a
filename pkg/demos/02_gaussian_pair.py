"""
Testing the Gaussian assumption, then learning under it
=======================================================

The tester looks only at unlabeled points: a tail check on every coordinate
followed by a comparison of low-degree moments inside a box. When it accepts,
an L1 polynomial regression on fresh labeled samples is trusted to come close
to the best halfspace.
"""

import numpy as np

from tlkit.data import SampleStream, halfspace_labeler, make_distribution, with_label_noise
from tlkit.gauss_pair import desk_profile, run_learner, run_tester

n, eps = 3, 0.5
params = desk_profile(eps, n)
print("effective parameters:", {k: params.to_json()[k] for k in ("d", "delta", "t", "N1", "N2", "moment_tol")})
print("changes from the closed-form recipe:")
for dev in params.deviations:
    print("  -", dev)

w = np.array([1.0, -0.6, 0.35])
w /= np.linalg.norm(w)
clean = halfspace_labeler(w, 0.25)
noisy = with_label_noise(clean, 0.1)

# the same tester on three distributions
for name in ("gaussian", "rademacher-coord", "scaled-gaussian"):
    D = make_distribution(name, n)
    v = run_tester(SampleStream(D.sample, noisy, seed=3, stage="tester"), params)
    print(f"{name:17s} accept={v.accept!s:5s} stage={v.stage:7s} worst={v.worst_index} gap={v.gap:.4f}")

# learning on the accepted one
D = make_distribution("gaussian", n)
predictor, report = run_learner(SampleStream(D.sample, noisy, seed=3, stage="learner"), params)
hold = SampleStream(D.sample, noisy, seed=3, stage="holdout").labeled(50000)
err = np.mean(predictor(hold.X) != hold.y)
opt = np.mean(clean(hold.X, None) != hold.y)
print(f"holdout error {err:.4f}, best halfspace {opt:.4f}, kept {report.samples_kept}/{report.samples_used} samples")
