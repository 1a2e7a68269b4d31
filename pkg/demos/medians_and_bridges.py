"""Medians through monotone maps, and the bridge-average transition density.

The median of a lognormal is the exponential of the normal median.  The same
bridge Monte Carlo engine that serves the logistic model reproduces the
Gompertz transition density.
"""

import numpy as np

from growthsde import bridges, gompertz
from growthsde import stats as gs
from growthsde.core import AnalyticLaw, TimeGrid, WienerConfig
from growthsde.transforms import gompertz_field

med = gs.median(AnalyticLaw.normal(0.3, 1.0))
print("median of exp(N(0.3, 1)):", gs.monotone_median_transport(np.exp, med).point, "=", np.exp(0.3))

xs = np.array([0.5, 1.0, 2.0])
vals, errs = gs.semi_explicit_pdf_general(gompertz_field(1.0), xs, 1.0, 1.0, 0.0, 0.5, n_bridges=4000, seed=5)
exact = gompertz.transition_law(gompertz.GompertzParams(1.0, 0.5), 1.0, 0.0, 1.0).pdf(xs)
for x, v, e, ex in zip(xs, vals, errs, exact):
    print(f"x = {x}: bridge MC {v:.4f} +- {e:.4f}  exact {ex:.4f}")

ens = bridges.sample_bridge(bridges.sine_shape(0.0, 1.0, 1.0), TimeGrid(0, 1, 10), WienerConfig(0.5, 6), 100_000)
print("sine bridge mid variance:", ens.values[:, 5].var(),
      "formula:", bridges.bridge_covariance(bridges.sine_shape(0.0, 1.0, 1.0), 0.5, 0.5, 0.5))
