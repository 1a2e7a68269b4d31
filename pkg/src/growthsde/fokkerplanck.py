"""One-dimensional Fokker-Planck equations ``f_t = (B f)_xx - (A f)_x``.

Evolution uses a finite-volume scheme whose flux is written against the
invariant weight ``w = exp(int A/B) / B``::

    J = A f - (B f)_x = -(B w) d/dx (f / w)

so that ``w`` is an exact discrete steady state and mass is conserved to
round-off with zero-flux ends.  Interior singular points ("walls") split the
domain into independent sub-intervals.

The substitution ``f = G0 g`` with ``G0 = sqrt(w)`` turns the generator into
the self-adjoint operator ``(p g')' - q g`` with ``p = B`` and
``q = (B' - A)^2 / (4B) - (B' - A)' / 2``; its spectrum gives the relaxation
rates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from .core import DensityCurve, GrowthSdeError
from .transforms import CoefficientField, derivative

__all__ = [
    "FpeProblem",
    "SturmLiouvilleProblem",
    "EigenResult",
    "ExpansionResult",
    "problem_from_field",
    "logistic_problem",
    "inverse_logistic_problem",
    "ou_problem",
    "log_weight",
    "evolve",
    "reduce_to_sturm_liouville",
    "logistic_eigenvalues",
    "numeric_eigensolve",
    "eigen_convergence",
    "eigen_expansion_solve",
    "invariant_density",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class FpeProblem:
    """Drift ``A(x)``, diffusion ``B(x) > 0`` and a finite domain with optional interior walls.

    ``drift_x``, ``diffusion_x`` and ``diffusion_xx`` are optional analytic
    derivatives; finite differences are used otherwise.
    """

    drift: Callable
    diffusion: Callable
    domain: tuple[float, float]
    walls: tuple = ()
    drift_x: Callable | None = None
    diffusion_x: Callable | None = None
    diffusion_xx: Callable | None = None
    name: str = "fpe"

    def __post_init__(self):
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ValueError("domain must be a finite interval (truncate singular or infinite ends)")
        w = tuple(sorted(self.walls))
        if any(not lo < x < hi for x in w):
            raise ValueError("walls must lie inside the domain")
        object.__setattr__(self, "walls", w)

    @property
    def sub_intervals(self) -> list[tuple[float, float]]:
        pts = [self.domain[0], *self.walls, self.domain[1]]
        return list(zip(pts[:-1], pts[1:]))

    def dA(self, x):
        return self.drift_x(x) if self.drift_x else derivative(lambda z, t: self.drift(z), x, 1)

    def dB(self, x):
        return self.diffusion_x(x) if self.diffusion_x else derivative(lambda z, t: self.diffusion(z), x, 1)

    def d2B(self, x):
        return self.diffusion_xx(x) if self.diffusion_xx else derivative(lambda z, t: self.diffusion(z), x, 2)


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    """``(p u')' - q u = -lambda u`` on ``interval`` with Dirichlet ends."""

    p: Callable
    q: Callable
    interval: tuple[float, float]
    boundary: tuple[str, str] = ("dirichlet", "dirichlet")
    name: str = "sl"

    def __post_init__(self):
        lo, hi = self.interval
        if not hi > lo:
            raise ValueError("empty interval")


@dataclass
class EigenResult:
    """Lowest eigenpairs on a grid; ``functions[:, n]`` has unit L2 norm and ``sign_changes[n]`` zeros."""

    values: np.ndarray
    x: np.ndarray
    functions: np.ndarray
    sign_changes: np.ndarray


@dataclass
class ExpansionResult:
    """Density from the eigenfunction expansion with a truncation estimate ``|c_k| e^{-lambda_k t}``."""

    curve: DensityCurve
    coefficients: np.ndarray
    truncation_error: float


# ---------------------------------------------------------------------------
# problem builders
# ---------------------------------------------------------------------------


def problem_from_field(field: CoefficientField, diffusion_d: float, domain, walls=()) -> FpeProblem:
    """``A = a``, ``B = D b^2`` for a time-independent coefficient field."""
    D = diffusion_d
    return FpeProblem(
        drift=lambda x: field.a(x, 0.0),
        diffusion=lambda x: D * field.b(x, 0.0) ** 2,
        domain=domain,
        walls=walls,
        drift_x=lambda x: field.da(x, 0.0),
        diffusion_x=lambda x: 2 * D * field.b(x, 0.0) * field.db(x, 0.0),
        diffusion_xx=lambda x: 2 * D * (field.db(x, 0.0) ** 2 + field.b(x, 0.0) * field.d2b(x, 0.0)),
        name=field.name,
    )


def logistic_problem(diffusion_d: float, domain=(1e-6, 20.0), theta: float = 1.0) -> FpeProblem:
    """``A = x (1 - x^theta)``, ``B = D x^2`` truncated to ``domain``."""
    D, th = diffusion_d, theta
    return FpeProblem(
        drift=lambda x: x * (1 - x**th),
        diffusion=lambda x: D * x * x,
        domain=domain,
        drift_x=lambda x: 1 - (1 + th) * x**th,
        diffusion_x=lambda x: 2 * D * x,
        diffusion_xx=lambda x: 2 * D + 0 * x,
        name="logistic" if th == 1 else f"theta-logistic({th:g})",
    )


def inverse_logistic_problem(diffusion_d: float, domain=(1e-3, 50.0)) -> FpeProblem:
    """Problem for ``Y = 1/X``: ``A = (2D - 1) y + 1``, ``B = D y^2``."""
    D = diffusion_d
    return FpeProblem(
        drift=lambda y: (2 * D - 1) * y + 1,
        diffusion=lambda y: D * y * y,
        domain=domain,
        drift_x=lambda y: (2 * D - 1) + 0 * y,
        diffusion_x=lambda y: 2 * D * y,
        diffusion_xx=lambda y: 2 * D + 0 * y,
        name="inverse-logistic",
    )


def ou_problem(diffusion_d: float, rate: float = 1.0, half_width: float | None = None) -> FpeProblem:
    """``A = -rate x``, ``B = D`` on ``[-L, L]`` (default ``L = 10 sqrt(D / rate)``)."""
    D = diffusion_d
    L = half_width or 10 * math.sqrt(D / rate)
    return FpeProblem(
        drift=lambda x: -rate * x,
        diffusion=lambda x: D + 0 * x,
        domain=(-L, L),
        drift_x=lambda x: -rate + 0 * x,
        diffusion_x=lambda x: 0 * x,
        diffusion_xx=lambda x: 0 * x,
        name="ou",
    )


# ---------------------------------------------------------------------------
# weights and evolution
# ---------------------------------------------------------------------------


def _gauss_cells(fn, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * (fn(mid[:, None] + half[:, None] * _GL_X[None, :]) @ _GL_W)


def log_weight(problem: FpeProblem, x: np.ndarray) -> np.ndarray:
    """``int A/B - ln B`` at increasing nodes ``x`` of one sub-interval, shifted so its maximum is 0.

    Cell integrals use six-point Gauss-Legendre on two halves, with
    adaptive quadrature where the halves disagree with a single panel.
    """
    x = np.asarray(x, dtype=float)
    ratio = lambda z: problem.drift(z) / problem.diffusion(z)
    coarse = _gauss_cells(ratio, x[:-1], x[1:])
    mid = 0.5 * (x[:-1] + x[1:])
    fine = _gauss_cells(ratio, x[:-1], mid) + _gauss_cells(ratio, mid, x[1:])
    cell = fine
    # cells next to singular ends get adaptive quadrature
    for i in np.flatnonzero(np.abs(fine - coarse) > 1e-10 * np.maximum(1.0, np.abs(fine))):
        cell[i] = integrate.quad(lambda z: float(ratio(z)), x[i], x[i + 1], epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    lw = np.concatenate([[0.0], np.cumsum(cell)]) - np.log(problem.diffusion(x))
    return lw - lw.max()


def _split(problem: FpeProblem, x: np.ndarray):
    parts = []
    for lo, hi in problem.sub_intervals:
        idx = np.flatnonzero((x > lo) & (x < hi) | ((x == lo) & (lo == problem.domain[0])) | ((x == hi) & (hi == problem.domain[1])))
        if idx.size:
            parts.append(idx)
    return parts


def _generator_bands(problem: FpeProblem, x: np.ndarray):
    """Tridiagonal generator ``L`` (banded storage) and control-volume widths."""
    n = x.size
    h = np.diff(x)
    vol = np.empty(n)
    vol[1:-1] = 0.5 * (x[2:] - x[:-2])
    vol[0], vol[-1] = 0.5 * h[0], 0.5 * h[-1]
    if n == 1:
        return np.zeros((3, 1)), np.ones(1)
    lw = log_weight(problem, x)
    B = problem.diffusion(x)
    g = np.sqrt(B[:-1] * B[1:]) / h
    dl = lw[:-1] - lw[1:]
    # J_{i+1/2} = -(up * f_{i+1} - down * f_i)
    up = g * np.exp(0.5 * dl)
    down = g * np.exp(-0.5 * dl)
    diag = np.zeros(n)
    upper = np.zeros(n)
    lower = np.zeros(n)
    # df_i/dt = (J_{i-1/2} - J_{i+1/2}) / vol_i
    diag[:-1] -= down
    upper[1:] += up
    diag[1:] -= up
    lower[:-1] += down
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[1:] / vol[:-1]
    ab[1] = diag / vol
    ab[2, :-1] = lower[:-1] / vol[1:]
    return ab, vol


def _banded_matvec(ab, f):
    out = ab[1] * f
    out[:-1] += ab[0, 1:] * f[1:]
    out[1:] += ab[2, :-1] * f[:-1]
    return out


def evolve(
    problem: FpeProblem,
    f0: DensityCurve,
    t_final: float,
    n_time_steps: int = 400,
    startup_steps: int = 4,
) -> DensityCurve:
    """Crank-Nicolson evolution of ``f0`` on its own grid.

    The first ``startup_steps`` steps are split into implicit-Euler quarter
    steps to damp the oscillations a narrow initial density would otherwise
    excite.  Values below ``-1e-10`` trigger a ``RuntimeWarning``; the result
    is clipped at 0.
    """
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    x = f0.x_grid
    f = f0.f_values.copy()
    if np.any(f < 0):
        raise ValueError("initial density must be nonnegative")
    out = np.zeros_like(f)
    dt = t_final / n_time_steps if n_time_steps else 0.0
    for idx in _split(problem, x):
        xs, fs = x[idx], f[idx].copy()
        if xs.size < 3 or t_final == 0:
            out[idx] = fs
            continue
        ab, vol = _generator_bands(problem, xs)
        n = xs.size
        eye = np.zeros((3, n))
        eye[1] = 1.0

        def implicit(fs, step):
            return linalg.solve_banded((1, 1), eye - step * ab, fs)

        done = 0
        for _ in range(min(startup_steps, n_time_steps)):
            for _ in range(4):
                fs = implicit(fs, dt / 4)
            done += 1
        lhs = eye - 0.5 * dt * ab
        for _ in range(n_time_steps - done):
            rhs = fs + 0.5 * dt * _banded_matvec(ab, fs)
            fs = linalg.solve_banded((1, 1), lhs, rhs)
        out[idx] = fs
    if np.min(out) < -1e-10:
        warnings.warn(f"negative density {np.min(out):.3g}: time step too large for this grid", RuntimeWarning)
    return DensityCurve(x, np.maximum(out, 0.0), label=f"evolved {problem.name}")


# ---------------------------------------------------------------------------
# spectral analysis
# ---------------------------------------------------------------------------


def reduce_to_sturm_liouville(problem: FpeProblem, interval=None) -> SturmLiouvilleProblem:
    """``p = B``, ``q = (B' - A)^2 / (4B) - (B' - A)' / 2`` on ``interval`` (default: the domain)."""

    def q(x):
        x = np.asarray(x, dtype=float)
        c = problem.dB(x) - problem.drift(x)
        c_x = problem.d2B(x) - problem.dA(x)
        return c * c / (4 * problem.diffusion(x)) - 0.5 * c_x

    return SturmLiouvilleProblem(
        p=problem.diffusion, q=q, interval=interval or problem.domain, name=f"sl {problem.name}"
    )


def logistic_eigenvalues(diffusion_d: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``lambda_n = (1 - D) n - D n^2`` for ``n = 0..n_max`` and a mask of the negative ones."""
    D = diffusion_d
    if not 0 < D < 1:
        raise ValueError("need 0 < D < 1")
    n = np.arange(n_max + 1)
    lam = (1 - D) * n - D * n * n
    return lam, lam < 0


def _mapped_grid(lo, hi, n, spacing):
    if spacing == "uniform":
        xi = np.linspace(lo, hi, n + 1)
        return xi, xi, np.ones_like(xi), lambda s: np.ones_like(s), lambda s: s
    if spacing == "log":
        if lo <= 0:
            raise ValueError("log spacing needs a positive interval")
        xi = np.linspace(math.log(lo), math.log(hi), n + 1)
        return xi, np.exp(xi), np.exp(xi), np.exp, np.exp
    raise ValueError(f"unknown spacing {spacing!r}")


def numeric_eigensolve(
    problem: SturmLiouvilleProblem, k: int, n_grid: int = 4000, spacing: str = "uniform"
) -> EigenResult:
    """Lowest ``k`` eigenpairs by a second-order mass-lumped discretisation.

    On a grid uniform in ``xi`` with ``x = phi(xi)`` the weak form
    ``int (p / phi') u_xi^2 + int q phi' u^2 = lambda int phi' u^2`` becomes a
    symmetric tridiagonal problem.  Dirichlet conditions hold at both ends.
    """
    lo, hi = problem.interval
    xi, x, jac, jac_fn, map_fn = _mapped_grid(lo, hi, n_grid, spacing)
    h = xi[1] - xi[0]
    xmid_xi = 0.5 * (xi[1:] + xi[:-1])
    xmid = map_fn(xmid_xi)
    stiff = problem.p(xmid) / jac_fn(xmid_xi) / h
    xin, jin = x[1:-1], jac[1:-1]
    mass = jin * h
    pot = problem.q(xin) * jin * h
    diag = stiff[:-1] + stiff[1:] + pot
    off = -stiff[1:-1]
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s
    e = off * s[:-1] * s[1:]
    k = min(k, d.size)
    vals, vecs = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    u = vecs * s[:, None]
    # unit L2 norm in x
    norms = np.sqrt(np.sum(u * u * mass[:, None], axis=0))
    u = u / norms
    u *= np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])])
    full = np.zeros((x.size, u.shape[1]))
    full[1:-1] = u
    changes = np.empty(u.shape[1], dtype=int)
    for j in range(u.shape[1]):
        col = u[:, j]
        big = col[np.abs(col) > 1e-6 * np.max(np.abs(col))]
        changes[j] = int(np.sum(np.signbit(big[1:]) != np.signbit(big[:-1])))
    return EigenResult(vals, x, full, changes)


def eigen_convergence(problem: SturmLiouvilleProblem, k: int, grids=(1000, 2000, 4000), spacing="uniform"):
    """Eigenvalues on successive grids and the Richardson extrapolation of the last two.

    Returns
    -------
    table : ndarray, shape (len(grids), k)
    extrapolated : ndarray, shape (k,)
    """
    table = np.array([numeric_eigensolve(problem, k, n, spacing).values for n in grids])
    extrap = table[-1] + (table[-1] - table[-2]) / ((grids[-1] / grids[-2]) ** 2 - 1)
    return table, extrap


def eigen_expansion_solve(
    problem: FpeProblem, f0: DensityCurve, t: float, k: int = 32, n_grid: int = 4000, spacing: str = "uniform"
) -> ExpansionResult:
    """``f(x, t) = sum_n c_n e^{-lambda_n t} G0(x) G_n(x)`` on one-interval problems.

    ``G0`` is the numeric ground state (positive) and ``c_n = int f0 G_n / G0``.
    """
    if problem.walls:
        raise GrowthSdeError("expansion is per sub-interval; build a problem without walls")
    sl = reduce_to_sturm_liouville(problem)
    res = numeric_eigensolve(sl, k, n_grid, spacing)
    x, G = res.x, res.functions
    g0 = G[:, 0]
    f0x = f0(x)
    inner = np.zeros_like(x)
    ok = g0 > 1e-300
    inner[ok] = f0x[ok] / g0[ok]
    coeff = np.trapezoid(inner[:, None] * G, x, axis=0)
    decay = np.exp(-res.values * t)
    f = g0 * (G @ (coeff * decay))
    trunc = float(abs(coeff[-1]) * decay[-1])
    return ExpansionResult(DensityCurve(x, np.maximum(f, 0.0), label="expansion"), coeff, trunc)


def invariant_density(problem: FpeProblem, n_grid: int = 4001, masses=None, edge_gap: float = 1e-6) -> DensityCurve:
    """Invariant density ``exp(int A/B) / B`` normalised on each sub-interval.

    Parameters
    ----------
    masses : sequence, optional
        Probability of each sub-interval (default: equal shares).  The weight
        cannot fix these across a wall because it vanishes there.
    edge_gap : float
        Relative distance kept from interior walls.
    """
    subs = problem.sub_intervals
    masses = np.full(len(subs), 1.0 / len(subs)) if masses is None else np.asarray(masses, dtype=float)
    if masses.size != len(subs) or abs(masses.sum() - 1) > 1e-12:
        raise ValueError("masses must have one entry per sub-interval and sum to 1")
    xs, fs = [], []
    per = max(16, n_grid // len(subs))
    for (lo, hi), m in zip(subs, masses):
        gap = edge_gap * (hi - lo)
        a = lo + gap if lo in problem.walls else lo
        b = hi - gap if hi in problem.walls else hi
        x = np.linspace(a, b, per)
        lw = log_weight(problem, x)
        w = np.exp(lw)
        z = np.trapezoid(w, x)
        if not math.isfinite(z) or z <= 0:
            raise GrowthSdeError(f"invariant weight not integrable on ({lo}, {hi})")
        xs.append(x)
        fs.append(m * w / z)
    return DensityCurve(np.concatenate(xs), np.concatenate(fs), label=f"invariant {problem.name}")
