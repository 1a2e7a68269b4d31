"""Fokker-Planck spectra: logistic model and the first excited oscillator state.

Reduces each Fokker-Planck operator to Sturm-Liouville form, solves the
discretised eigenproblem and compares with the known eigenvalues.
"""

import math

from growthsde import fokkerplanck as fp
from growthsde import stochmech

D = 0.1
sl = fp.reduce_to_sturm_liouville(fp.logistic_problem(D, (1e-6, 60.0)))
num = fp.numeric_eigensolve(sl, 8, 4000, "log")
exact, _ = fp.logistic_eigenvalues(D, 5)
print("logistic D=0.1 numeric:", num.values[:6].round(5))
print("logistic D=0.1 exact:  ", exact[:6])

qho = fp.reduce_to_sturm_liouville(stochmech.qho_problem(stochmech.QhoState(1), (0.0, math.inf)))
table, extrap = fp.eigen_convergence(qho, 4)
print("oscillator n=1 half line, refined:", table[-1].round(6), "extrapolated:", extrap.round(6))
