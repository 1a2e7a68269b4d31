"""Exponential functionals of Brownian motion.

``X(t) = int_0^t e^{W(s)} ds`` with ``E[W^2] = 2 D t``.  Its moments are
finite sums ``sum_j c_j e^{j D t} / D^n`` with rational ``c_j``; they are built
exactly by iterated integration and compared with a closed-form guess.  The
module also gives the density of ``e^{W(s)} + e^{W(t)}`` and Monte Carlo
checks of the transport equations of the pair ``(X(t), e^{W(t)})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from scipy import integrate, special

from .core import (
    AnalyticLaw,
    DensityCurve,
    GrowthSdeError,
    PathEnsemble,
    TimeGrid,
    WienerConfig,
    ks_distance,
    map_path_blocks,
    normal_increments,
    _stride_for,
)

__all__ = [
    "MomentExpression",
    "moment_recursive",
    "moment_conjecture",
    "root_test_profile",
    "sample_integral",
    "two_time_sum_pdf",
    "two_time_sum_cdf",
    "two_time_sum_samples",
    "VelocityFieldResult",
    "velocity_field_estimate",
    "JointFpeResult",
    "joint_fpe_residual",
]

MAX_ORDER = 64


@dataclass(frozen=True)
class MomentExpression:
    """``M_n(t) = D^{-n} sum_j c_j e^{j D t}`` with exact rational ``c_j``.

    ``terms`` is a tuple of ``(c_j, j)`` sorted by ``j`` with distinct ``j``.
    """

    order_n: int
    terms: tuple

    def coefficient(self, j: int) -> Fraction:
        for c, k in self.terms:
            if k == j:
                return c
        return Fraction(0)

    def evaluate(self, t: float, diffusion_d: float, dps: int | None = None) -> float:
        """Value at ``t``; high-precision arithmetic avoids the cancellation near ``t = 0``."""
        x = diffusion_d * t
        with mpmath.workdps(dps or 30 + 3 * self.order_n):
            mx = mpmath.mpf(x)
            acc = mpmath.mpf(0)
            for c, j in self.terms:
                acc += mpmath.mpf(c.numerator) / c.denominator * mpmath.expm1(j * mx)
            return float(acc / mpmath.mpf(diffusion_d) ** self.order_n)

    def __str__(self) -> str:
        parts = [f"({c})*exp({j}Dt)" if j else f"({c})" for c, j in self.terms]
        return " + ".join(parts) + f"  [/D^{self.order_n}]"


def _check_order(n):
    if int(n) != n or not 1 <= n <= MAX_ORDER:
        raise ValueError(f"order must be an integer in 1..{MAX_ORDER}, got {n}")


def moment_recursive(n: int) -> MomentExpression:
    """``E[X(t)^n]`` by exact iterated integration.

    The innermost integrand carries ``e^{(2n-1) v}`` and each outer level
    ``e^{(2(n-k)+1) v}``; a term ``c e^{j v}`` integrates over ``[0, v]`` to
    ``c (e^{j v} - 1) / j``.  The final factor is ``n!``.
    """
    _check_order(n)
    poly = {0: Fraction(1)}
    for k in range(1, n + 1):
        m = 2 * (n - k) + 1
        shifted = {j + m: c for j, c in poly.items()}
        if min(shifted) < 1:
            raise GrowthSdeError("zero exponent in the moment recursion")
        poly = {}
        for j, c in shifted.items():
            poly[j] = poly.get(j, Fraction(0)) + c / j
            poly[0] = poly.get(0, Fraction(0)) - c / j
    scale = math.factorial(n)
    terms = tuple(sorted(((c * scale, j) for j, c in poly.items() if c != 0), key=lambda p: p[1]))
    return MomentExpression(n, terms)


def moment_conjecture(n: int) -> MomentExpression:
    """Closed-form guess ``(-1)^n n! sum_k (-1)^k (2 - [k=0]) e^{k^2 D t} / ((n-k)! (n+k)!)``."""
    _check_order(n)
    sign = -1 if n % 2 else 1
    terms = []
    for k in range(n + 1):
        c = Fraction(sign * (-1) ** k * (1 if k == 0 else 2) * math.factorial(n),
                     math.factorial(n - k) * math.factorial(n + k))
        terms.append((c, k * k))
    return MomentExpression(n, tuple(terms))


def root_test_profile(dt_product: float, n_max: int = 12) -> np.ndarray:
    """``M_n^{1/n} / n`` for ``n = 1..n_max`` at ``D t = dt_product`` (``D = 1``)."""
    return np.array([moment_recursive(n).evaluate(dt_product, 1.0) ** (1.0 / n) / n for n in range(1, n_max + 1)])


def sample_integral(
    grid: TimeGrid,
    cfg: WienerConfig,
    n_paths: int,
    stream: int = 0,
    record_points: int | None = None,
    return_wiener: bool = False,
    workers: int | None = None,
):
    """Trapezoid ``X(t) = int_{t0}^t e^{W}`` along Wiener paths.

    Returns
    -------
    PathEnsemble of ``X``, and also the ``W`` ensemble when ``return_wiener``.
    """
    stride = _stride_for(grid, record_points)
    half = 0.5 * grid.dt

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        w = np.zeros((stop - start, grid.n_steps + 1))
        np.cumsum(dw, axis=1, out=w[:, 1:])
        ew = np.exp(w)
        x = np.zeros_like(w)
        np.cumsum(half * (ew[:, 1:] + ew[:, :-1]), axis=1, out=x[:, 1:])
        cols = slice(None, None, stride)
        return np.concatenate([x[:, cols], w[:, cols]], axis=1)

    raw = map_path_blocks(n_paths, block, 4 * grid.n_steps, workers=workers)
    g = grid.coarsen(stride)
    nc = g.n_steps + 1
    xs = PathEnsemble(g, raw[:, :nc], cfg.master_seed, "exp-functional")
    if return_wiener:
        return xs, PathEnsemble(g, raw[:, nc:], cfg.master_seed, "wiener")
    return xs


# ---------------------------------------------------------------------------
# density of e^{W(s)} + e^{W(t)}
# ---------------------------------------------------------------------------


def _sum_pdf_point(z, s, tau, D):
    # x = z / (1 + e^{-u}) maps (0, z) onto the real line; (z - x)/x = e^{-u}
    vs, vt = 2 * D * s, 2 * D * tau
    lz = math.log(z)

    def integrand(u):
        l1p = np.logaddexp(0.0, -u)
        lx = lz - l1p
        # f_X(x) f_R((z-x)/x) / x * dx/du, all in logs
        log_fx = -lx * lx / (2 * vs) - lx - 0.5 * math.log(2 * math.pi * vs)
        log_fr = -u * u / (2 * vt) + u - 0.5 * math.log(2 * math.pi * vt)
        log_jac = lz - u - 2 * l1p
        return math.exp(log_fx + log_fr - lx + log_jac)

    peak = 0.0
    val = integrate.quad(integrand, -np.inf, peak, epsabs=0, epsrel=1e-11, limit=400)[0]
    val += integrate.quad(integrand, peak, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
    return val


def two_time_sum_pdf(s: float, t: float, diffusion_d: float, z_grid) -> DensityCurve:
    """Density of ``Z = e^{W(s)} + e^{W(t)}`` on ``z_grid``.

    With ``X = e^{W(s)}`` and ``R = e^{W(t) - W(s)}`` independent log-normals,
    ``Z = X (1 + R)`` and ``f_Z(z) = int_0^z f_X(x) f_R((z - x)/x) / x dx``.
    Values with ``z <= 1e-12`` are set to 0.
    """
    if not 0 < s <= t:
        raise GrowthSdeError("need 0 < s <= t")
    tau = t - s
    if tau == 0:
        # Z = 2 e^{W(s)}
        law = AnalyticLaw.lognormal(math.log(2.0), 2 * diffusion_d * s)
        z = np.asarray(z_grid, dtype=float)
        return DensityCurve(z, np.where(z > 1e-12, law.pdf(np.maximum(z, 1e-300)), 0.0), label="sum-pdf")
    z = np.asarray(z_grid, dtype=float)
    f = np.array([_sum_pdf_point(zi, s, tau, diffusion_d) if zi > 1e-12 else 0.0 for zi in z])
    return DensityCurve(z, f, label="sum-pdf")


def two_time_sum_cdf(s: float, t: float, diffusion_d: float, z) -> np.ndarray:
    """``P(Z <= z) = E[F_R(z / X - 1)]`` by quadrature over ``ln X``."""
    if not 0 < s < t:
        raise GrowthSdeError("need 0 < s < t")
    vs, vt = 2 * diffusion_d * s, 2 * diffusion_d * (t - s)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(zs.size)
    for i, zi in enumerate(zs):
        if zi <= 1e-12:
            out[i] = 0.0
            continue
        lz = math.log(zi)
        lo = -12 * math.sqrt(vs)
        if lz <= lo:
            out[i] = 0.0
            continue

        def integrand(w):
            if w >= lz:
                return 0.0
            # ln(z e^{-w} - 1) without overflow
            log_ratio = (lz - w) + math.log1p(-math.exp(w - lz))
            return math.exp(-w * w / (2 * vs)) / math.sqrt(2 * math.pi * vs) * special.ndtr(log_ratio / math.sqrt(vt))

        # the integrand vanishes for w >= ln z; mass below lo is under 1e-32
        out[i] = integrate.quad(integrand, lo, lz, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    return out.reshape(np.shape(z))


def two_time_sum_samples(s: float, t: float, cfg: WienerConfig, n: int, stream: int = 0) -> np.ndarray:
    """Exact samples of ``e^{W(s)} + e^{W(t)}`` (two Gaussian increments per sample)."""
    if not 0 < s < t:
        raise GrowthSdeError("need 0 < s < t")
    grid = TimeGrid(0.0, 1.0, 2)
    # unit normals: variance 2 D' dt = 1 with D' = 1
    z = normal_increments(grid, WienerConfig(1.0, cfg.master_seed), 0, n, stream)
    w1 = math.sqrt(2 * cfg.diffusion_d * s) * z[:, 0]
    w2 = w1 + math.sqrt(2 * cfg.diffusion_d * (t - s)) * z[:, 1]
    return np.exp(w1) + np.exp(w2)


# ---------------------------------------------------------------------------
# velocity field and joint transport equation
# ---------------------------------------------------------------------------


@dataclass
class VelocityFieldResult:
    """Binned ``v(x, t) = E[e^{W(t)} | X(t) = x]`` and the continuity residual.

    ``velocity`` is NaN in empty bins (listed in ``gaps``).  ``residual_l1`` is
    ``int |dF/dt + v f| dx`` with ``F`` the cdf of ``X(t)``; the time
    derivative is a central difference over ``t +- dt_fd``.
    """

    curve: DensityCurve
    velocity: np.ndarray
    density: np.ndarray
    gaps: np.ndarray
    residual_l1: float


def velocity_field_estimate(
    t: float, cfg: WienerConfig, n_paths: int, n_bins: int = 60, dt_fd: float = 0.01,
    steps_per_unit: int = 2000, stream: int = 0,
) -> VelocityFieldResult:
    """Monte Carlo estimate of the conditional velocity of ``X(t)`` and the continuity check.

    ``X`` is nondecreasing, so ``F(x, t-dt) - F(x, t+dt)`` is the probability
    of crossing ``x`` during ``[t-dt, t+dt]``, which must equal ``2 dt v f``.
    """
    if not t > 0:
        raise GrowthSdeError("need t > 0")
    if dt_fd >= t:
        dt_fd = 0.5 * t
    k = max(1, int(round(dt_fd * steps_per_unit)))
    n_steps = k * int(round((t + dt_fd) / dt_fd))
    grid = TimeGrid(0.0, t + dt_fd, n_steps)
    i_mid = int(round(t / grid.dt))
    i_lo, i_hi = i_mid - k, i_mid + k
    dt_real = k * grid.dt
    half = 0.5 * grid.dt

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        w = np.zeros((stop - start, grid.n_steps + 1))
        np.cumsum(dw, axis=1, out=w[:, 1:])
        ew = np.exp(w)
        x = np.zeros_like(w)
        np.cumsum(half * (ew[:, 1:] + ew[:, :-1]), axis=1, out=x[:, 1:])
        return np.column_stack([x[:, i_lo], x[:, i_mid], x[:, i_hi], ew[:, i_mid]])

    data = map_path_blocks(n_paths, block, 3 * grid.n_steps)
    xlo, xmid, xhi, ymid = data.T
    lo, hi = np.quantile(xmid, [0.001, 0.999])
    edges = np.linspace(lo, hi, n_bins + 1)
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[1:] + edges[:-1])
    counts, _ = np.histogram(xmid, edges)
    ysum, _ = np.histogram(xmid, edges, weights=ymid)
    dens = counts / (n_paths * width)
    with np.errstate(invalid="ignore", divide="ignore"):
        vel = np.where(counts > 0, ysum / np.maximum(counts, 1), np.nan)
    gaps = centers[counts == 0]
    # continuity in integrated form at the bin centres
    flo = np.searchsorted(np.sort(xlo), centers, side="right") / n_paths
    fhi = np.searchsorted(np.sort(xhi), centers, side="right") / n_paths
    flux = ysum / (n_paths * width)
    resid = (fhi - flo) / (2 * dt_real) + flux
    resid_l1 = float(np.nansum(np.abs(resid)) * width)
    curve = DensityCurve(centers, np.nan_to_num(vel), label="velocity")
    return VelocityFieldResult(curve, vel, dens, gaps, resid_l1)


@dataclass
class JointFpeResult:
    """Residual of the joint transport equation and marginal diagnostics."""

    residual_l1: float
    y_marginal_ks: float
    low_x_mass: float
    sparse_cells: int


def joint_fpe_residual(
    t: float, cfg: WienerConfig, n_paths: int, dt_fd: float = 0.02, n_cells: int = 128,
    steps_per_unit: int = 1000, stream: int = 0,
) -> JointFpeResult:
    """Histogram check of ``f_t = D (y^2 f)_yy - y f_x - D (y f)_y`` for ``(X(t), e^{W(t)})``.

    The density is a ``n_cells x n_cells`` histogram on log-spaced cells at
    ``t - dt_fd``, ``t``, ``t + dt_fd``; derivatives are finite differences on
    the cell centres.  The residual is reported as an L1 norm over the cells.
    """
    if not t > dt_fd > 0:
        raise GrowthSdeError("need t > dt_fd > 0")
    D = cfg.diffusion_d
    k = max(1, int(round(dt_fd * steps_per_unit)))
    n_steps = k * int(round((t + dt_fd) / dt_fd))
    grid = TimeGrid(0.0, t + dt_fd, n_steps)
    i_mid = int(round(t / grid.dt))
    idx = (i_mid - k, i_mid, i_mid + k)
    dt_real = k * grid.dt
    half = 0.5 * grid.dt

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        w = np.zeros((stop - start, grid.n_steps + 1))
        np.cumsum(dw, axis=1, out=w[:, 1:])
        ew = np.exp(w)
        x = np.zeros_like(w)
        np.cumsum(half * (ew[:, 1:] + ew[:, :-1]), axis=1, out=x[:, 1:])
        return np.column_stack([x[:, i] for i in idx] + [ew[:, i] for i in idx])

    data = map_path_blocks(n_paths, block, 3 * grid.n_steps)
    xs, ys = data[:, :3], data[:, 3:]
    xe = np.geomspace(*np.quantile(xs[:, 1], [0.005, 0.995]), n_cells + 1)
    ye = np.geomspace(*np.quantile(ys[:, 1], [0.005, 0.995]), n_cells + 1)
    xc, yc = np.sqrt(xe[1:] * xe[:-1]), np.sqrt(ye[1:] * ye[:-1])
    area = np.outer(np.diff(xe), np.diff(ye))
    hists = [np.histogram2d(xs[:, j], ys[:, j], [xe, ye])[0] / (n_paths * area) for j in range(3)]
    f = hists[1]
    ft = (hists[2] - hists[0]) / (2 * dt_real)
    Y = yc[None, :]
    fx = np.gradient(f, xc, axis=0)
    g = Y * Y * f
    gyy = np.gradient(np.gradient(g, yc, axis=1), yc, axis=1)
    hy = np.gradient(Y * f, yc, axis=1)
    resid = ft - (D * gyy - Y * fx - D * hy)
    counts = np.histogram2d(xs[:, 1], ys[:, 1], [xe, ye])[0]
    l1 = float(np.sum(np.abs(resid)[1:-1, 1:-1] * area[1:-1, 1:-1]))
    ks = ks_distance(ys[:, 1], AnalyticLaw.lognormal(0.0, 2 * D * grid.times[i_mid]))
    low = float(np.mean(xs[:, 1] < 1e-3 * t))
    return JointFpeResult(l1, ks, low, int(np.sum(counts < 5)))
