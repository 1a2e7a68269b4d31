"""Logistic growth: pathwise solution and the gamma stationary law.

The pathwise solution keeps paths positive for any noise level.  Below unit
noise the marginal relaxes to a gamma law; at and above it no stationary law
exists and the library says so.
"""

from growthsde import logistic
from growthsde.core import TimeGrid, ks_distance
from growthsde.logistic import NoStationaryLawError, ThetaLogisticParams

for D in (0.2, 0.5):
    p = ThetaLogisticParams(1.0, D)
    ens = logistic.pathwise_solution(p, 1.0, TimeGrid(0, 30, 300), 50_000, seed=2, record_points=2)
    law = logistic.stationary_law(p)
    print(f"D = {D}: stationary {law.family}{law.params}, KS at t=30 {ks_distance(ens.marginal(), law):.4f}")

try:
    logistic.stationary_law(ThetaLogisticParams(1.0, 1.2))
except NoStationaryLawError as exc:
    print("D = 1.2:", exc)

theta = ThetaLogisticParams(2.0, 0.3)
print("theta-logistic stationary law:", logistic.stationary_law(theta).to_json())
