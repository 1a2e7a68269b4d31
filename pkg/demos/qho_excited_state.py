"""Diffusion attached to the first excited oscillator state.

The forward velocity has a pole at the node x = 0 that no path crosses.
The closed-form transition density is checked against simulation, and the
conditional mean is followed to its long-time limit.
"""

import math

import numpy as np

from growthsde import stochmech
from growthsde.core import TimeGrid, WienerConfig, euler_maruyama
from growthsde.transforms import qho_field

st = stochmech.QhoState(1)
field = qho_field(1, sub_interval=(0.0, math.inf))
ens = euler_maruyama(field, 1.0, TimeGrid(0, 1, 1000), WienerConfig(st.D, 4), 20_000, record_points=2)
x = ens.marginal()
print("paths below the node:", int(np.sum(x <= 0)))
print(f"mean at t=1: MC {np.nanmean(x):.4f}  closed form {stochmech.excited1_conditional_mean(st, 1.0, 1.0):.4f}")
for t in (0.1, 1.0, 3.0, 10.0):
    print(f"E[X(t)] at t={t}: {stochmech.excited1_conditional_mean(st, 1.0, t):.6f}")
print("limit 2 sqrt(2/pi):", 2 * math.sqrt(2 / math.pi))
print("attractors n=3:", stochmech.attractors(stochmech.QhoState(3)))
