"""Stochastic logistic and theta-logistic growth.

The dimensionless SDE is ``dX = X (1 - X^theta) dt + X dW`` (``theta = 1`` is
the plain logistic).  ``Y = X^{-theta}`` satisfies a linear SDE, which gives
the pathwise solution::

    X(t) = ( x0^theta e^{-Zbar(t)} / (1 + theta x0^theta int_0^t e^{-Zbar}) )^{1/theta}
    Zbar(t) = theta (D - 1) t - theta W(t)

The time integral is accumulated in the log domain so that no path
overflows.  Each step integrates the exponential of the linear interpolant
exactly and multiplies by the mean factor of the Brownian excursion between
grid points.  The transition density has no closed form; the estimator here
multiplies an explicit prefactor by a Monte Carlo average over pinned
Brownian bridges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bridges import conditional_bridge_nodes
from .core import (
    AnalyticLaw,
    GrowthSdeError,
    PathEnsemble,
    TimeGrid,
    WienerConfig,
    map_path_blocks,
    normal_increments,
    _stride_for,
)
from .transforms import CoefficientField, theta_logistic_field

__all__ = [
    "ThetaLogisticParams",
    "AuxIntegralProcess",
    "NoStationaryLawError",
    "deterministic_path",
    "pathwise_solution",
    "stationary_law",
    "reciprocal_stationary_law",
    "log_stationary_law",
    "semi_explicit_transition",
    "shape_prefactor",
]


class NoStationaryLawError(GrowthSdeError):
    """Raised when ``D >= 1``: noise outweighs growth and no stationary law exists."""


@dataclass(frozen=True)
class ThetaLogisticParams:
    """Saturation exponent ``theta > 0`` (1 for the logistic) and diffusion ``D``."""

    theta: float = 1.0
    diffusion_d: float = 0.5

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.diffusion_d >= 0:
            raise ValueError(f"diffusion_d must be nonnegative, got {self.diffusion_d}")

    def field(self) -> CoefficientField:
        return theta_logistic_field(self.theta)


@dataclass
class AuxIntegralProcess:
    """Per-path ``Zbar(t)`` and ``A(t) = x0^theta int_0^t e^{-Zbar}`` on the recorded grid.

    ``log_a`` holds ``ln A`` (``-inf`` at ``t = 0``) and is the overflow-safe form.
    """

    zbar: np.ndarray
    log_a: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return np.exp(self.log_a)


def deterministic_path(theta: float, x0: float, t):
    """Noise-free trajectory ``(x0^theta / (x0^theta + (1 - x0^theta) e^{-theta t}))^{1/theta}``."""
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    t = np.asarray(t, dtype=float)
    p = x0**theta
    return (p / (p + (1.0 - p) * np.exp(-theta * t))) ** (1.0 / theta)


def _log_sinhc(x):
    """``ln(sinh(x) / x)``, stable for all real ``x``."""
    x = np.abs(x)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    big = xs + np.log1p(-np.exp(-2 * xs)) - np.log(2 * xs)
    return np.where(small, x * x / 6 - x**4 / 180, big)


def pathwise_solution(
    params: ThetaLogisticParams,
    x0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int = 0,
    stream: int = 0,
    record_points: int | None = None,
    return_aux: bool = False,
    workers: int | None = None,
):
    """Paths of the theta-logistic process from its closed-form solution.

    Returns
    -------
    PathEnsemble, or (PathEnsemble, AuxIntegralProcess) when ``return_aux``.
    """
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    th, D = params.theta, params.diffusion_d
    cfg = WienerConfig(D if D > 0 else 1.0, seed)
    stride = _stride_for(grid, record_points)
    tau = grid.times - grid.t0
    lx0 = th * math.log(x0)
    # per step: exact integral of the exponential of the linear interpolant,
    # times the mean excursion factor of the pinned bridge, e^{theta^2 D dt / 6}
    log_dt = math.log(grid.dt) + th * th * D * grid.dt / 6.0

    def block(start, stop):
        m = stop - start
        if D > 0:
            dw = normal_increments(grid, cfg, start, stop, stream)
        else:
            dw = np.zeros((m, grid.n_steps))
        w = np.zeros((m, grid.n_steps + 1))
        np.cumsum(dw, axis=1, out=w[:, 1:])
        del dw
        zbar = th * (D - 1.0) * tau[None, :] - th * w
        del w
        inc = log_dt - 0.5 * (zbar[:, 1:] + zbar[:, :-1]) + _log_sinhc(0.5 * (zbar[:, 1:] - zbar[:, :-1]))
        log_int = np.empty_like(zbar)
        log_int[:, 0] = -np.inf
        np.logaddexp.accumulate(inc, axis=1, out=log_int[:, 1:])
        log_a = lx0 + log_int
        log_x = (lx0 - zbar - np.logaddexp(0.0, math.log(th) + log_a)) / th
        cols = slice(None, None, stride)
        parts = [np.exp(log_x[:, cols])]
        if return_aux:
            parts += [zbar[:, cols], log_a[:, cols]]
        return np.concatenate(parts, axis=1)

    raw = map_path_blocks(n_paths, block, 3 * grid.n_steps, workers=workers)
    ncol = grid.n_steps // stride + 1
    ens = PathEnsemble(grid.coarsen(stride), raw[:, :ncol], seed, f"theta-logistic({th:g},{D:g})")
    if return_aux:
        return ens, AuxIntegralProcess(raw[:, ncol:2 * ncol], raw[:, 2 * ncol:])
    return ens


def _check_stationary(params):
    if not params.diffusion_d < 1:
        raise NoStationaryLawError(
            f"D = {params.diffusion_d} >= 1: the weight is not integrable at 0"
        )
    if not params.diffusion_d > 0:
        raise NoStationaryLawError("D = 0: the stationary law is degenerate")


def stationary_law(params: ThetaLogisticParams) -> AnalyticLaw:
    """Stationary law of ``X``.

    ``theta = 1``: ``Gamma(shape (1-D)/D, rate 1/D)``.  Otherwise the
    generalized gamma with ``X^theta ~ Gamma(shape (1-D)/(theta D), scale theta D)``.
    """
    _check_stationary(params)
    th, D = params.theta, params.diffusion_d
    if th == 1:
        return AnalyticLaw.gamma((1 - D) / D, 1 / D)
    return AnalyticLaw.generalized_gamma(th, (1 - D) / (th * D), (th * D) ** (1 / th))


def reciprocal_stationary_law(params: ThetaLogisticParams) -> AnalyticLaw:
    """Stationary law of ``Y = X^{-theta}``: inverse gamma."""
    _check_stationary(params)
    th, D = params.theta, params.diffusion_d
    return AnalyticLaw.inverse_gamma((1 - D) / (th * D), 1 / (th * D))


def log_stationary_law(params: ThetaLogisticParams) -> AnalyticLaw:
    """Stationary law of ``theta ln X``: log-gamma."""
    _check_stationary(params)
    th, D = params.theta, params.diffusion_d
    return AnalyticLaw.log_gamma((1 - D) / (th * D), 1 / (th * D))


def shape_prefactor(x, sign: int = 1):
    """``e^{-x - (sign - ln x)^2} / x``, extended by 0 at ``x = 0``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x)
        out = np.exp(-x - (sign - lx) ** 2 - lx)
    return np.where(x > 0, out, 0.0)


def _log_prefactor(th, D, x, y, tau):
    lr = np.log(x / y)
    return (
        -(x**th - y**th) / (2 * D * th)
        - ((1 - D) * tau - lr) ** 2 / (4 * D * tau)
        - np.log(x)
        - 0.5 * math.log(4 * math.pi * D * tau)
    )


def semi_explicit_transition(
    params: ThetaLogisticParams,
    x,
    t: float,
    y: float,
    s: float,
    n_bridges: int = 10_000,
    seed: int = 0,
    n_nodes: int = 129,
    stream: int = 0,
):
    """Transition density ``f(x, t | y, s)`` by bridge Monte Carlo.

    The density is the explicit prefactor times ``mu = E[exp(-tau/(4D) K)]``
    with ``tau = t - s`` and::

        K = y^{2 theta} int_0^1 (x/y)^{2 r theta} e^{2 theta Wbar(r)} dr
            - 2 (1 + (theta - 1) D) y^theta int_0^1 (x/y)^{r theta} e^{theta Wbar(r)} dr

    The bridge integrals use composite Simpson on ``n_nodes`` equally spaced
    nodes.  The same bridge samples serve every ``x``.

    Returns
    -------
    value, stderr : float or ndarray
    """
    if not t > s:
        raise GrowthSdeError("need t > s")
    if not y > 0:
        raise ValueError("y must be positive")
    if n_bridges < 2:
        raise ValueError("need at least two bridge samples")
    th, D = params.theta, params.diffusion_d
    if not D > 0:
        raise ValueError("diffusion_d must be positive")
    tau = t - s
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    r = np.linspace(0.0, 1.0, n_nodes)
    wb = conditional_bridge_nodes(s, t, r, WienerConfig(D, seed), n_bridges, stream=stream)
    e1 = np.exp(th * wb)
    e2 = e1 * e1
    c = 1 + (th - 1) * D
    vals = np.empty(xs.size)
    errs = np.empty(xs.size)
    for i, xi in enumerate(xs):
        q = (xi / y) ** (r * th)
        i2 = integrate.simpson(e2 * (q * q)[None, :], x=r, axis=1)
        i1 = integrate.simpson(e1 * q[None, :], x=r, axis=1)
        k = y ** (2 * th) * i2 - 2 * c * y**th * i1
        samples = np.exp(-tau / (4 * D) * k)
        pref = math.exp(_log_prefactor(th, D, xi, y, tau))
        vals[i] = pref * samples.mean()
        errs[i] = pref * samples.std(ddof=1) / math.sqrt(n_bridges)
    if np.ndim(x) == 0:
        return float(vals[0]), float(errs[0])
    return vals, errs
