"""Exact Gompertz paths against their lognormal transition law.

Simulates the stochastic Gompertz model with the exact Ornstein-Uhlenbeck
scheme on ln X, then compares the marginal with the closed-form law at an
intermediate time and at a long horizon.
"""

from growthsde import gompertz
from growthsde.core import TimeGrid, ks_distance

params = gompertz.GompertzParams(alpha=1.0, diffusion_d=0.5)
for t in (1.0, 3.0, 20.0):
    ens = gompertz.exact_paths(params, 0.2, TimeGrid(0, t, 100), 50_000, seed=1, record_points=2)
    law = gompertz.transition_law(params, 0.2, 0.0, t)
    x = ens.marginal()
    print(f"t = {t:5.1f}  MC mean {x.mean():.4f}  law mean {law.mean():.4f}  KS {ks_distance(x, law):.4f}")

print("stationary law:", gompertz.stationary_law(params).to_json())
