"""
Why a few hundred samples cannot certify Gaussianity
====================================================

Draw M points from a Gaussian and call the uniform distribution over them S.
With N samples and N^2 much smaller than M, a sampler almost never repeats a
point, so a tester cannot tell S from the Gaussian. Labels that are coin
flips inside a thin shell make S hopeless to learn. The harness measures both
effects and prints them next to the closed-form bounds.
"""

from tlkit.fooling import (
    FoolingConfig,
    collision_bound,
    collision_probability,
    desk_gaussian_tester,
    desk_l1_learner,
    run_fooling_experiment,
)

cfg = FoolingConfig(M=50_000, N=100, n=20, seed=7, trials=20)
print("no repeat among N draws:", round(collision_probability(cfg.N, cfg.M), 4),
      "(birthday bound", collision_bound(cfg.N, cfg.M), ")")

rep = run_fooling_experiment(cfg, desk_gaussian_tester(cfg.n, cfg.N), desk_l1_learner(cfg.n, cfg.N))
print(f"tester acceptance on S      {rep.acceptance_empirical:.2f}  (on the Gaussian {rep.acceptance_true:.2f})")
print(f"guaranteed acceptance floor {rep.acceptance_bound:.4f}")
print(f"learner advantage on S      {rep.advantage_empirical:.4f} +- {rep.advantage_sigma:.4f}")
print(f"advantage ceiling           {rep.advantage_bound:.4f}")
print(f"points with fixed labels    {rep.phi:.4f}")
