"""
The Boolean cube: k-wise independence and decision lists
========================================================

On {-1, +1}^n the tester checks that every product of at most k coordinates
is nearly unbiased. A planted parity ``x3 = x1 x2`` fails at the triple
``1,2,3``. Behind an accepting tester, short decision lists can be found by
exhaustive search.
"""

import numpy as np

from tlkit.cube_pair import (
    derive_cube_params,
    derive_dl_params,
    run_cube_halfspace_learner,
    run_decision_list_learner,
    run_kwise_tester,
)
from tlkit.data import SampleStream, decision_list_labeler, majority_labeler, make_distribution, with_label_noise
from tlkit.l1fit import predict

params = derive_cube_params(0.5, 8, k=3, max_degree=3)
print("tester samples:", params.tester_samples, "learner samples:", params.learner_samples)

for name in ("cube", "parity-planted"):
    D = make_distribution(name, 8)
    v = run_kwise_tester(SampleStream(D.sample, None, seed=1, stage="tester"), params)
    print(f"{name:15s} accept={v.accept} worst subset={v.worst_index} bias={v.gap:.4f}")

# majority of three through a degree-3 regression
D = make_distribution("cube", 8)
lab = with_label_noise(majority_labeler([0, 1, 2]), 0.1)
model, rep = run_cube_halfspace_learner(SampleStream(D.sample, lab, seed=1, stage="learner"), params)
hold = SampleStream(D.sample, lab, seed=1, stage="holdout").labeled(20000)
print(f"majority: holdout error {np.mean(predict(model, hold.X) != hold.y):.4f} at 10% label noise")

# a planted two-rule decision list on ten bits
dl_params = derive_dl_params(0.25, 10)
D = make_distribution("cube", 10)
lab = with_label_noise(decision_list_labeler([2, 6], [1, -1], [-1, 1]), 0.05)
dl, rep = run_decision_list_learner(SampleStream(D.sample, lab, seed=2, stage="learner"), 0.25, params=dl_params)
print(f"learned list: order={dl.order} bits={dl.bits} values={dl.values} default={dl.default}")
print(f"training error {rep.empirical_01:.4f} on {rep.samples_used} samples")
