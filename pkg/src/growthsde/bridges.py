"""Brownian bridges: shaped bridges between two points and the pinned unit bridge.

A shaped bridge interpolates ``a -> b`` over ``[0, T]`` along
``a g(t/T) + b h(t/T)`` with ``g(0)=1, g(1)=0, h(0)=0, h(1)=1`` and adds the
Gaussian fluctuation ``g(t/T) int_0^t dW / g``.  Its covariance is
``v g(s/T) g(t/T) int_0^{s^t} du / g(u/T)^2`` where ``v`` is the variance rate
of the driving noise; by default ``v = D`` so the rectilinear bridge has
covariance ``D (s^t - s t / T)``.

The pinned bridge used for transition densities lives on ``r in [0, 1]`` and
is built from the ``2D`` Wiener process of the rest of the package:
``Wbar(r) = W(s + (t-s) r) - r W(t) - (1-r) W(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .core import EmptyEnsembleError, GrowthSdeError, PathEnsemble, TimeGrid, WienerConfig
from .core import map_path_blocks, path_generator

__all__ = [
    "BridgeShape",
    "linear_shape",
    "parabolic_shape",
    "sine_shape",
    "sine_squared_shape",
    "SHAPES",
    "sample_bridge",
    "bridge_drift",
    "bridge_covariance",
    "conditional_bridge_nodes",
]


@dataclass(frozen=True)
class BridgeShape:
    """Interpolating functions ``g, h`` on ``[0, 1]``, endpoints ``a, b`` and horizon ``T``.

    ``g_dot`` and ``h_dot`` are derivatives with respect to the scaled time
    ``u = t/T``; ``inv_g2_integral(u0, u1)`` optionally gives
    ``int_{u0}^{u1} du / g(u)^2`` in closed form.
    """

    g: Callable
    h: Callable
    a: float = 0.0
    b: float = 0.0
    T: float = 1.0
    g_dot: Callable | None = None
    h_dot: Callable | None = None
    inv_g2_integral: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        checks = [(self.g(0.0), 1.0), (self.g(1.0), 0.0), (self.h(0.0), 0.0), (self.h(1.0), 1.0)]
        if any(abs(float(v) - e) > 1e-12 for v, e in checks):
            raise ValueError("need g(0)=1, g(1)=0, h(0)=0, h(1)=1")

    def with_endpoints(self, a: float, b: float, T: float) -> "BridgeShape":
        return BridgeShape(self.g, self.h, a, b, T, self.g_dot, self.h_dot, self.inv_g2_integral, self.name)

    def mean(self, t):
        u = np.asarray(t, dtype=float) / self.T
        return self.a * self.g(u) + self.b * self.h(u)

    def _gd(self, u):
        if self.g_dot:
            return self.g_dot(u)
        e = 1e-6
        return (self.g(u + e) - self.g(u - e)) / (2 * e)

    def _hd(self, u):
        if self.h_dot:
            return self.h_dot(u)
        e = 1e-6
        return (self.h(u + e) - self.h(u - e)) / (2 * e)

    def inv_g2(self, u0: float, u1: float) -> float:
        if self.inv_g2_integral:
            return float(self.inv_g2_integral(u0, u1))
        return integrate.quad(lambda u: 1.0 / float(self.g(u)) ** 2, u0, u1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def linear_shape(a=0.0, b=0.0, T=1.0) -> BridgeShape:
    """``g = 1 - u``, ``h = u``: the rectilinear bridge."""
    return BridgeShape(
        lambda u: 1.0 - np.asarray(u, dtype=float), lambda u: np.asarray(u, dtype=float) * 1.0, a, b, T,
        g_dot=lambda u: -np.ones_like(np.asarray(u, dtype=float)),
        h_dot=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        inv_g2_integral=lambda u0, u1: 1.0 / (1.0 - u1) - 1.0 / (1.0 - u0),
        name="linear",
    )


def parabolic_shape(a=0.0, b=0.0, T=1.0) -> BridgeShape:
    """``g = (1-u)^2``, ``h = u^2``."""
    return BridgeShape(
        lambda u: (1.0 - np.asarray(u, dtype=float)) ** 2, lambda u: np.asarray(u, dtype=float) ** 2, a, b, T,
        g_dot=lambda u: -2.0 * (1.0 - np.asarray(u, dtype=float)),
        h_dot=lambda u: 2.0 * np.asarray(u, dtype=float),
        inv_g2_integral=lambda u0, u1: ((1.0 - u1) ** -3 - (1.0 - u0) ** -3) / 3.0,
        name="parabolic",
    )


def sine_shape(a=0.0, b=0.0, T=1.0) -> BridgeShape:
    """``g = cos(pi u / 2)``, ``h = sin(pi u / 2)``."""
    c = math.pi / 2
    return BridgeShape(
        lambda u: np.where(np.asarray(u, dtype=float) == 1.0, 0.0, np.cos(c * np.asarray(u, dtype=float))),
        lambda u: np.sin(c * np.asarray(u, dtype=float)), a, b, T,
        g_dot=lambda u: -c * np.sin(c * np.asarray(u, dtype=float)),
        h_dot=lambda u: c * np.cos(c * np.asarray(u, dtype=float)),
        inv_g2_integral=lambda u0, u1: (math.tan(c * u1) - math.tan(c * u0)) / c,
        name="sine",
    )


def sine_squared_shape(a=0.0, b=0.0, T=1.0) -> BridgeShape:
    """``g = cos^2(pi u / 2)``, ``h = sin^2(pi u / 2)``."""
    c = math.pi / 2

    def g(u):
        u = np.asarray(u, dtype=float)
        return np.where(u == 1.0, 0.0, np.cos(c * u) ** 2)

    def inv(u0, u1):
        # int sec^4 = tan + tan^3 / 3
        f = lambda u: (math.tan(c * u) + math.tan(c * u) ** 3 / 3.0) / c
        return f(u1) - f(u0)

    return BridgeShape(
        g, lambda u: np.sin(c * np.asarray(u, dtype=float)) ** 2, a, b, T,
        g_dot=lambda u: -math.pi * np.sin(c * np.asarray(u)) * np.cos(c * np.asarray(u)),
        h_dot=lambda u: math.pi * np.sin(c * np.asarray(u)) * np.cos(c * np.asarray(u)),
        inv_g2_integral=inv,
        name="sine-squared",
    )


SHAPES = {
    "linear": linear_shape,
    "parabolic": parabolic_shape,
    "sine": sine_shape,
    "sine-squared": sine_squared_shape,
}


def bridge_drift(shape: BridgeShape, x, t):
    """Drift of the bridge SDE: ``(g'/(T g)) (x - b h) + b h' / T`` at scaled time ``t/T``.

    Raises
    ------
    GrowthSdeError
        At ``t >= T`` where the drift has its pole.
    """
    if not t < shape.T:
        raise GrowthSdeError(f"bridge drift has a pole at t = T = {shape.T}")
    u = t / shape.T
    g = float(shape.g(u))
    if g == 0:
        raise GrowthSdeError("g vanishes before the horizon")
    x = np.asarray(x, dtype=float)
    return (float(shape._gd(u)) / (shape.T * g)) * (x - shape.b * float(shape.h(u))) + shape.b * float(shape._hd(u)) / shape.T


def bridge_covariance(shape: BridgeShape, s: float, t: float, variance_rate: float) -> float:
    """``v g(s/T) g(t/T) int_0^{min} du / g^2``."""
    T = shape.T
    lo = min(s, t)
    if max(s, t) >= T or lo <= 0:
        return 0.0
    return variance_rate * float(shape.g(s / T)) * float(shape.g(t / T)) * T * shape.inv_g2(0.0, lo / T)


def sample_bridge(
    shape: BridgeShape,
    grid: TimeGrid,
    cfg: WienerConfig,
    n_paths: int,
    variance_rate: float | None = None,
    stream: int = 0,
    workers: int | None = None,
) -> PathEnsemble:
    """Exact Gaussian sampling of a shaped bridge on ``grid``.

    The fluctuation ``U = g int dW / g`` obeys the exact recursion
    ``U_{k+1} = (g_{k+1}/g_k) U_k + g_{k+1} N(0, v int_{t_k}^{t_{k+1}} du / g^2)``,
    so ``U(T) = 0`` holds exactly because ``g(1) = 0``.

    Parameters
    ----------
    variance_rate : float, optional
        Variance per unit time of the driving noise; defaults to ``cfg.diffusion_d``.
    """
    if n_paths < 1:
        raise EmptyEnsembleError("n_paths must be at least 1")
    if abs(grid.t0) > 0 or abs(grid.t1 - shape.T) > 1e-12 * shape.T:
        raise GrowthSdeError("grid must span [0, T]")
    v = cfg.diffusion_d if variance_rate is None else variance_rate
    T = shape.T
    u = grid.times / T
    gk = np.asarray(shape.g(u), dtype=float) * np.ones_like(u)
    gk[-1] = 0.0
    if np.any(gk[:-1] == 0):
        raise GrowthSdeError("g vanishes before the horizon")
    ratio = gk[1:] / gk[:-1]
    sd = np.empty(grid.n_steps)
    for k in range(grid.n_steps - 1):
        sd[k] = gk[k + 1] * math.sqrt(v * T * shape.inv_g2(u[k], u[k + 1]))
    sd[-1] = 0.0
    mean = shape.mean(grid.times)
    mean[-1] = shape.b
    mean[0] = shape.a

    def block(start, stop):
        m = stop - start
        z = np.empty((m, grid.n_steps))
        for row, i in enumerate(range(start, stop)):
            path_generator(cfg.master_seed, stream, i).standard_normal(out=z[row])
        out = np.empty((m, grid.n_steps + 1))
        uu = np.zeros(m)
        out[:, 0] = 0.0
        for k in range(grid.n_steps):
            uu = ratio[k] * uu + sd[k] * z[:, k]
            out[:, k + 1] = uu
        out[:, -1] = 0.0
        return out + mean[None, :]

    vals = map_path_blocks(n_paths, block, grid.n_steps, workers=workers)
    return PathEnsemble(grid, vals, cfg.master_seed, f"bridge({shape.name})")


def conditional_bridge_nodes(
    s: float,
    t: float,
    r_nodes,
    cfg: WienerConfig,
    n_samples: int,
    stream: int = 0,
    workers: int | None = None,
) -> np.ndarray:
    """Samples of the pinned bridge ``Wbar(r)`` at sorted nodes in ``[0, 1]``.

    Sequential conditional normals: given ``Wbar(r_k)``, the value at
    ``r_{k+1}`` is normal with mean ``Wbar(r_k) (1 - r_{k+1}) / (1 - r_k)`` and
    variance ``2 D (t-s) (r_{k+1} - r_k)(1 - r_{k+1}) / (1 - r_k)``.

    Returns
    -------
    ndarray, shape (n_samples, len(r_nodes))
    """
    if not t > s:
        raise GrowthSdeError("need t > s")
    if n_samples < 1:
        raise EmptyEnsembleError("n_samples must be at least 1")
    r = np.asarray(r_nodes, dtype=float)
    if np.any(np.diff(r) < 0) or r.min() < 0 or r.max() > 1:
        raise ValueError("r_nodes must be sorted inside [0, 1]")
    scale = 2 * cfg.diffusion_d * (t - s)
    n = r.size
    coef = np.zeros(n)
    sd = np.zeros(n)
    prev = 0.0
    for k in range(n):
        rk = r[k]
        if rk <= 0 or rk >= 1:
            prev = rk if rk <= 0 else prev
            continue
        coef[k] = (1 - rk) / (1 - prev)
        sd[k] = math.sqrt(scale * (rk - prev) * (1 - rk) / (1 - prev))
        prev = rk

    def block(start, stop):
        m = stop - start
        z = np.empty((m, n))
        for row, i in enumerate(range(start, stop)):
            path_generator(cfg.master_seed, stream, i).standard_normal(out=z[row])
        out = np.zeros((m, n))
        cur = np.zeros(m)
        for k in range(n):
            if r[k] <= 0 or r[k] >= 1:
                out[:, k] = 0.0
                continue
            cur = coef[k] * cur + sd[k] * z[:, k]
            out[:, k] = cur
        return out

    return map_path_blocks(n_samples, block, n, workers=workers)
