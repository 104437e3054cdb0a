"""
Polynomial stand-ins for a halfspace
====================================

A halfspace ``sign(v.x - theta)`` is not a polynomial, but a clipped ramp of
slope ``1/eps`` is close to it away from the boundary, and a truncated
Chebyshev series is close to the ramp. This script walks through the pieces.
"""

import numpy as np

from tlkit.polycore import (
    Ramp,
    build_sign_approximator,
    coefficient_bound,
    project,
    series_eval,
)

# the ramp we want to approximate, on the window [-2, 2]
ramp = Ramp(theta=0.0, eps=0.2)
grid = np.linspace(-2.0, 2.0, 4001)

print("degree  sup error  degree*error  max |a_k|")
for d in (10, 20, 40, 80):
    s = project(ramp, 2.0, d)
    err = np.max(np.abs(series_eval(s, grid) - ramp(grid)))
    print(f"{d:6d}  {err:9.4f}  {d * err:12.3f}  {np.max(np.abs(s.coeffs)):9.3f}")

# the error shrinks like 1/d (the ramp has bounded variation), and the
# coefficients stay far below the generic bound
print("generic coefficient bound at d=10:", coefficient_bound(10))

# lift the 1-D series to a multivariate polynomial along a direction
v = np.array([0.6, 0.8])
P = build_sign_approximator(v, theta=0.0, eps=0.4, beta=2.5)
print("monomials in the 2-D approximator:", len(P.terms))

rng = np.random.default_rng(0)
X = rng.standard_normal((20000, 2))
target = np.sign(X @ v)
far = np.abs(X @ v) > 0.4
print("mean |P - sign| away from the boundary:", np.mean(np.abs(P(X[far]) - target[far])))
