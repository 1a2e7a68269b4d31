"""Acceptance checks shared by ``growthsde verify`` and the test suite.

Each check returns a :class:`CheckResult`; tolerances and sample sizes are
fixed here and must not be relaxed.
"""

from __future__ import annotations

import filecmp
import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bridges, expfunc, fokkerplanck, gompertz, logistic, stochmech
from .core import TimeGrid, WienerConfig, euler_maruyama, ks_distance
from .stats import semi_explicit_pdf_general
from .transforms import gompertz_field, qho_field

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} [{self.number:2d}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _ks_curve(sample, cdf: Callable, stride: int = 1) -> float:
    x = np.sort(np.asarray(sample, dtype=float))[::stride]
    n = len(sample)
    ranks = np.arange(1, n + 1)[::stride]
    F = cdf(x)
    return float(max(np.max(ranks / n - F), np.max(F - (ranks - 1) / n)))


def check_moments() -> tuple[bool, str]:
    """Recursive and closed-form moment expressions agree exactly for n <= 12."""
    bad = [n for n in range(1, 13) if expfunc.moment_recursive(n).terms != expfunc.moment_conjecture(n).terms]
    return not bad, "all n <= 12 equal" if not bad else f"mismatch at n = {bad}"


def check_gompertz() -> tuple[bool, str]:
    p = gompertz.GompertzParams(1.0, 0.5)
    e3 = gompertz.exact_paths(p, 1.0, TimeGrid(0, 3, 60), 100_000, seed=21, record_points=2)
    k3 = ks_distance(e3.values[:, -1], gompertz.transition_law(p, 1.0, 0, 3))
    e20 = gompertz.exact_paths(p, 1.0, TimeGrid(0, 20, 200), 100_000, seed=22, record_points=2)
    k20 = ks_distance(e20.values[:, -1], gompertz.stationary_law(p))
    return k3 < 0.01 and k20 < 0.01, f"KS(t=3) = {k3:.4f}, KS(t=20) = {k20:.4f} (< 0.01)"


def check_deterministic() -> tuple[bool, str]:
    D = 1e-12
    grid = TimeGrid(0, 10, 2000)
    errs = []
    for a, x0 in [(1.0, 0.2), (0.5, 3.0), (2.0, 1.5)]:
        e = gompertz.exact_paths(gompertz.GompertzParams(a, D), x0, grid, 1, seed=1)
        errs.append(np.max(np.abs(e.values[0] - gompertz.deterministic_path(a, x0, e.grid.times))))
    for th, x0 in [(1.0, 0.2), (1.0, 3.0), (1.0, 0.9), (2.0, 0.5), (0.5, 2.0), (3.0, 1.7)]:
        e = logistic.pathwise_solution(logistic.ThetaLogisticParams(th, D), x0, grid, 1, seed=1)
        errs.append(np.max(np.abs(e.values[0] - logistic.deterministic_path(th, x0, e.grid.times))))
    worst = float(max(errs))
    return worst < 1e-4, f"max sup-error over 9 cases = {worst:.2e} (< 1e-4)"


def check_logistic_stationary() -> tuple[bool, str]:
    p5 = logistic.ThetaLogisticParams(1.0, 0.5)
    e5 = logistic.pathwise_solution(p5, 1.0, TimeGrid(0, 30, 300), 100_000, seed=41, record_points=2)
    k5 = ks_distance(e5.values[:, -1], logistic.stationary_law(p5))
    # relaxation at D = 0.9 is set by the continuum edge (1-D)^2/(4D) ~ 0.003
    p9 = logistic.ThetaLogisticParams(1.0, 0.9)
    e9 = logistic.pathwise_solution(p9, 1.0, TimeGrid(0, 1000, 1000), 100_000, seed=42, record_points=2)
    k9 = ks_distance(e9.values[:, -1], logistic.stationary_law(p9))
    return k5 < 0.01 and k9 < 0.015, f"KS(D=0.5, t=30) = {k5:.4f} (< 0.01), KS(D=0.9, t=1000) = {k9:.4f} (< 0.015)"


def check_semi_explicit() -> tuple[bool, str]:
    D = 0.5
    law = gompertz.transition_law(gompertz.GompertzParams(1.0, D), 1.0, 0.0, 1.0)
    xs = law.ppf(np.array([0.1, 0.3, 0.5, 0.7, 0.9]))
    v, _ = semi_explicit_pdf_general(gompertz_field(1.0), xs, 1.0, 1.0, 0.0, D, n_bridges=10_000, seed=51)
    rel = float(np.max(np.abs(v / law.pdf(xs) - 1)))
    params = logistic.ThetaLogisticParams(1.0, D)
    ens = logistic.pathwise_solution(params, 1.0, TimeGrid(0, 1, 500), 100_000, seed=52, record_points=2)
    edges = np.linspace(0.05, 4.0, 80)
    hist, _ = np.histogram(ens.values[:, -1], edges)
    hist = hist / ens.n_paths / np.diff(edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    from .transforms import logistic_field

    curve, _ = semi_explicit_pdf_general(logistic_field(), mids, 1.0, 1.0, 0.0, D, n_bridges=10_000, seed=53)
    sup = float(np.max(np.abs(hist - curve)))
    return rel < 0.02 and sup < 0.05, f"Gompertz max rel = {rel:.4f} (< 0.02), logistic hist sup = {sup:.4f} (< 0.05)"


def check_spectra() -> tuple[bool, str]:
    D = 0.1
    sl = fokkerplanck.reduce_to_sturm_liouville(fokkerplanck.logistic_problem(D, (1e-6, 60.0)))
    num = fokkerplanck.numeric_eigensolve(sl, 12, 4000, "log").values
    lam, _ = fokkerplanck.logistic_eigenvalues(D, 12)
    positive = lam[lam > 0]
    # the formula repeats lower values for n > (1 - D)/(2D); every positive
    # value must be in the numeric spectrum, and n <= 4 must match by index
    set_err = max(float(np.min(np.abs(num[1:] - v)) / v) for v in positive)
    idx_err = float(np.max(np.abs(num[1:5] - lam[1:5]) / lam[1:5]))
    zero_err = abs(num[0]) / lam[1]
    ok_log = max(set_err, idx_err, zero_err) < 1e-2

    s1 = stochmech.QhoState(1)
    r1 = fokkerplanck.numeric_eigensolve(
        fokkerplanck.reduce_to_sturm_liouville(stochmech.qho_problem(s1, (0.0, math.inf))), 4, 4000)
    mu1 = r1.values / s1.omega
    err1 = max(abs(mu1[0]), *(abs(mu1[m] - 2 * m) / (2 * m) for m in (1, 2, 3)))

    s2 = stochmech.QhoState(2)
    r2 = fokkerplanck.numeric_eigensolve(
        fokkerplanck.reduce_to_sturm_liouville(stochmech.qho_problem(s2, (-1.0, 1.0))), 8, 4000)
    odd = r2.values[r2.sign_changes % 2 == 1][:3] / s2.omega
    ref = np.array([7.44, 37.06, 86.41])
    err2 = float(np.max(np.abs(odd - ref) / ref))
    ok = ok_log and err1 < 1e-3 and err2 < 1e-2
    return ok, (f"logistic rel = {max(set_err, idx_err, zero_err):.1e}, QHO n=1 rel = {err1:.1e}, "
                f"QHO n=2 {np.round(odd, 2).tolist()} rel = {err2:.1e}")


def check_qho_excited() -> tuple[bool, str]:
    st = stochmech.QhoState(1)
    field = qho_field(1, 1.0, 1.0, (0.0, math.inf))
    cfg = WienerConfig(st.D, 71)
    e1 = euler_maruyama(field, 1.0, TimeGrid(0, 1, 1000), cfg, 100_000, record_points=2)
    x1 = e1.values[:, -1]
    grid = np.linspace(0, 8, 4001)
    dens = stochmech.excited1_transition(st, grid, 1.0, 0.0, 1.0)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    ks = _ks_curve(x1, lambda v: np.interp(v, grid, cum))
    mean_err = abs(x1.mean() / stochmech.excited1_conditional_mean(st, 1.0, 1.0) - 1)
    limit = 2 * st.sigma * math.sqrt(2 / math.pi)
    asym_err = abs(stochmech.excited1_conditional_mean(st, 1.0, 10.0) / limit - 1)
    e10 = euler_maruyama(field, 1.0, TimeGrid(0, 10, 2000), WienerConfig(st.D, 72), 100_000, record_points=2)
    asym_mc = abs(e10.values[:, -1].mean() / limit - 1)
    ok = ks < 0.02 and mean_err < 0.01 and asym_err < 0.01 and asym_mc < 0.01
    return ok, (f"KS = {ks:.4f} (< 0.02), mean rel = {mean_err:.4f}, "
                f"t=10 mean rel formula {asym_err:.1e} / MC {asym_mc:.4f} (< 0.01)")


def check_bridges() -> tuple[bool, str]:
    D, s, t = 0.5, 0.0, 1.0
    r = np.array([0.0, 0.3, 0.7, 1.0])
    w = bridges.conditional_bridge_nodes(s, t, r, WienerConfig(D, 81), 1_000_000)
    emp = float(np.mean(w[:, 1] * w[:, 2]) - w[:, 1].mean() * w[:, 2].mean())
    ref = 2 * D * (t - s) * (0.3 - 0.3 * 0.7)
    cov_err = abs(emp / ref - 1)
    T = 2.0
    ens = bridges.sample_bridge(bridges.linear_shape(0.0, 0.0, T), TimeGrid(0, T, 20), WienerConfig(D, 82), 1_000_000)
    mid = ens.values[:, 10]
    var_err = abs(mid.var() / (D * T / 4) - 1)
    return cov_err < 0.01 and var_err < 0.01, f"cov rel = {cov_err:.4f}, midpoint var rel = {var_err:.4f} (< 0.01)"


def check_sum_pdf() -> tuple[bool, str]:
    from scipy import integrate

    D, s, t = 0.5, 0.5, 1.0
    mass = integrate.quad(lambda z: expfunc.two_time_sum_pdf(s, t, D, [z]).f_values[0], 0, np.inf,
                          epsabs=1e-12, limit=400)[0]
    sample = expfunc.two_time_sum_samples(s, t, WienerConfig(D, 91), 100_000)
    ks = _ks_curve(sample, lambda z: expfunc.two_time_sum_cdf(s, t, D, z), stride=50)
    return abs(mass - 1) < 1e-6 and ks < 0.01, f"mass - 1 = {mass - 1:.1e}, KS = {ks:.4f} (< 0.01)"


def check_attractors() -> tuple[bool, str]:
    worst = 0.0
    for n, starts in [(1, [-3.0, -0.4, 0.5, 2.5]), (2, [-4.0, -1.2, -0.5, 0.6, 1.3, 3.5]),
                      (3, [-4.5, -2.0, -1.0, -0.3, 0.4, 1.1, 2.2, 5.0])]:
        st = stochmech.QhoState(n)
        att = stochmech.attractors(st)
        nd = stochmech.nodes(st)
        for y in starts:
            x = stochmech.deterministic_trajectory(st, y, 30.0 / st.omega)
            worst = max(worst, abs(x - att[np.searchsorted(nd, y)]))
    ref = {1: math.sqrt(2), 2: math.sqrt(5), 3: 2.8766}
    tab = max(abs(stochmech.attractors(stochmech.QhoState(n))[-1] - v) for n, v in ref.items())
    tab = max(tab, abs(stochmech.attractors(stochmech.QhoState(3))[2] - 0.8515))
    return worst < 1e-3 and tab < 1e-3, f"max |x(T) - attractor| = {worst:.1e}, table deviation = {tab:.1e}"


def check_determinism() -> tuple[bool, str]:
    from .cli import main

    argv = ["gompertz", "--alpha", "1", "--D", "0.5", "--x0", "1", "--t1", "5", "--paths", "20000", "--seed", "7"]
    log_argv = ["logistic", "--D", "0.5", "--x0", "1", "--t1", "2", "--paths", "5000", "--seed", "3",
                "--kind", "ensemble", "--record-points", "5"]
    old = os.environ.get("GROWTHSDE_THREADS")
    same = True
    try:
        with tempfile.TemporaryDirectory() as tmp:
            for name, args in [("g", argv), ("l", log_argv)]:
                paths = []
                for threads in ("1", "3"):
                    os.environ["GROWTHSDE_THREADS"] = threads
                    out = os.path.join(tmp, f"{name}{threads}.csv")
                    if main(args + ["--out", out]) != 0:
                        return False, "CLI run failed"
                    paths.append(out)
                same &= filecmp.cmp(*paths, shallow=False)
    finally:
        if old is None:
            os.environ.pop("GROWTHSDE_THREADS", None)
        else:
            os.environ["GROWTHSDE_THREADS"] = old
    return same, "outputs byte-identical across 1 and 3 workers" if same else "outputs differ"


CHECKS: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
    (1, "moment recursion vs closed form", check_moments),
    (2, "Gompertz exact paths", check_gompertz),
    (3, "deterministic limits", check_deterministic),
    (4, "logistic stationarity", check_logistic_stationary),
    (5, "bridge-average transition density", check_semi_explicit),
    (6, "spectra", check_spectra),
    (7, "QHO n=1 closed form", check_qho_excited),
    (8, "bridge covariance", check_bridges),
    (9, "two-time sum density", check_sum_pdf),
    (10, "QHO attractors", check_attractors),
    (11, "determinism", check_determinism),
]


def run_check(number: int) -> CheckResult:
    num, name, fn = next(c for c in CHECKS if c[0] == number)
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, reported with its message
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(num, name, bool(ok), detail, time.perf_counter() - start)


def run_checks(numbers=None, echo: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for num, _, _ in CHECKS:
        if numbers is None or num in numbers:
            res = run_check(num)
            if echo:
                echo(res.line())
            results.append(res)
    return results
