"""Time grids, Wiener sampling, Euler-Maruyama stepping and law utilities.

Diffusion convention
--------------------
Every Wiener process in this package satisfies ``E[W(t)^2] = 2 D t``, so an
increment over ``dt`` is ``Normal(0, 2 D dt)``.  Most SDE libraries use unit
variance per unit time; all closed-form laws elsewhere in the package assume
the ``2D`` convention.

Random streams
--------------
Path ``i`` of a stream draws its normals from a Philox generator whose key is
built from ``(master_seed, stream)`` and whose counter starts at ``i`` in the
top word.  A path's noise therefore depends only on ``(seed, stream, i)``: the
worker count and block size never change results, and two solvers called with
the same seed and stream see the same Brownian increments.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "GrowthSdeError",
    "EmptyEnsembleError",
    "TimeGrid",
    "WienerConfig",
    "PathEnsemble",
    "AnalyticLaw",
    "DensityCurve",
    "path_generator",
    "normal_increments",
    "map_path_blocks",
    "worker_count",
    "sample_wiener",
    "euler_maruyama",
    "ks_distance",
    "write_csv",
]

_MASK64 = (1 << 64) - 1
# Upper bound on doubles held per block of increments (about 32 MB).
_BLOCK_BUDGET = 1 << 22


class GrowthSdeError(Exception):
    """Base class for errors raised by this package."""


class EmptyEnsembleError(GrowthSdeError):
    """Raised when an ensemble with zero paths is requested."""


# ---------------------------------------------------------------------------
# grids and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t0 < t0 + dt < ... < t1``.

    Parameters
    ----------
    t0, t1 : float
        Interval endpoints, ``t1 > t0``.
    n_steps : int
        Number of steps, at least 1.
    """

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)):
            raise ValueError("grid endpoints must be finite")
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got t0={self.t0}, t1={self.t1}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def with_resolution(cls, t0: float, t1: float, steps_per_unit: int = 2**12) -> "TimeGrid":
        """Grid with roughly ``steps_per_unit`` steps per unit time."""
        return cls(t0, t1, max(1, int(math.ceil((t1 - t0) * steps_per_unit))))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_steps + 1)

    def coarsen(self, stride: int) -> "TimeGrid":
        """Sub-grid keeping every ``stride``-th point; ``stride`` must divide n_steps."""
        if self.n_steps % stride:
            raise ValueError(f"stride {stride} does not divide n_steps {self.n_steps}")
        return TimeGrid(self.t0, self.t1, self.n_steps // stride)


@dataclass(frozen=True)
class WienerConfig:
    """Diffusion coefficient ``D`` and master seed of a Wiener process."""

    diffusion_d: float
    master_seed: int = 0

    def __post_init__(self):
        if not self.diffusion_d > 0:
            raise ValueError(f"diffusion_d must be positive, got {self.diffusion_d}")
        if int(self.master_seed) != self.master_seed:
            raise ValueError("master_seed must be an integer")


@dataclass
class PathEnsemble:
    """Sample paths on a shared grid.

    Attributes
    ----------
    grid : TimeGrid
        Grid of the recorded columns.
    values : ndarray, shape (n_paths, grid.n_steps + 1)
    seed : int
        Master seed the paths were generated from.
    process_label : str
    invalid_step : ndarray of int, optional
        Per path, the step index at which the path was flagged invalid, or -1.
    """

    grid: TimeGrid
    values: np.ndarray
    seed: int
    process_label: str
    invalid_step: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_steps + 1:
            raise ValueError(
                f"values must have shape (n_paths, {self.grid.n_steps + 1}), got {self.values.shape}"
            )
        if self.invalid_step is None:
            self.invalid_step = np.full(self.values.shape[0], -1, dtype=np.int64)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def valid(self) -> np.ndarray:
        return self.invalid_step < 0

    def marginal(self, t: float | None = None) -> np.ndarray:
        """Values of the valid paths at the recorded time closest to ``t`` (default: last)."""
        col = -1 if t is None else int(np.argmin(np.abs(self.times - t)))
        return self.values[self.valid, col]

    def mean(self) -> np.ndarray:
        return self.values[self.valid].mean(axis=0)

    def var(self) -> np.ndarray:
        return self.values[self.valid].var(axis=0, ddof=1)

    def to_csv(self, path, meta: dict | None = None) -> None:
        """Header row of times, then one row per path."""
        rows = np.vstack([self.times[None, :], self.values])
        info = {"kind": "ensemble", "seed": self.seed, "process": self.process_label}
        info.update(meta or {})
        write_csv(path, rows, info)


# ---------------------------------------------------------------------------
# analytic laws and numeric densities
# ---------------------------------------------------------------------------

_FAMILY_PARAMS = {
    "normal": ("mean", "var"),
    "lognormal": ("log_mean", "log_var"),
    "gamma": ("shape", "rate"),
    "generalized_gamma": ("theta", "shape", "scale"),
    "inverse_gamma": ("shape", "rate"),
    "log_gamma": ("shape", "rate"),
    "degenerate": ("value",),
}


@dataclass(frozen=True)
class AnalyticLaw:
    """A parametric distribution from a small fixed set of families.

    Families and parameters:

    ``normal(mean, var)``
    ``lognormal(log_mean, log_var)``: ``ln X ~ normal(log_mean, log_var)``.
    ``gamma(shape, rate)``
    ``generalized_gamma(theta, shape, scale)``: ``(X/scale)**theta ~ gamma(shape, 1)``.
    ``inverse_gamma(shape, rate)``: ``1/X ~ gamma(shape, rate)``.
    ``log_gamma(shape, rate)``: ``exp(X) ~ gamma(shape, rate)``.
    ``degenerate(value)``: point mass.
    """

    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _FAMILY_PARAMS:
            raise ValueError(f"unknown family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        names = _FAMILY_PARAMS[self.family]
        if len(params) != len(names):
            raise ValueError(f"{self.family} expects parameters {names}")
        if not all(math.isfinite(p) for p in params):
            raise ValueError("parameters must be finite")
        positive = {
            "normal": (1,),
            "lognormal": (1,),
            "gamma": (0, 1),
            "generalized_gamma": (0, 1, 2),
            "inverse_gamma": (0, 1),
            "log_gamma": (0, 1),
            "degenerate": (),
        }[self.family]
        for i in positive:
            if not params[i] > 0:
                raise ValueError(f"{self.family}: {names[i]} must be positive, got {params[i]}")

    # constructors with named arguments
    @classmethod
    def normal(cls, mean, var):
        return cls("normal", (mean, var))

    @classmethod
    def lognormal(cls, log_mean, log_var):
        return cls("lognormal", (log_mean, log_var))

    @classmethod
    def gamma(cls, shape, rate):
        return cls("gamma", (shape, rate))

    @classmethod
    def generalized_gamma(cls, theta, shape, scale):
        return cls("generalized_gamma", (theta, shape, scale))

    @classmethod
    def inverse_gamma(cls, shape, rate):
        return cls("inverse_gamma", (shape, rate))

    @classmethod
    def log_gamma(cls, shape, rate):
        return cls("log_gamma", (shape, rate))

    @classmethod
    def degenerate(cls, value):
        return cls("degenerate", (value,))

    @property
    def named_params(self) -> dict:
        return dict(zip(_FAMILY_PARAMS[self.family], self.params))

    def _frozen(self):
        p = self.params
        f = self.family
        if f == "normal":
            return stats.norm(loc=p[0], scale=math.sqrt(p[1]))
        if f == "lognormal":
            return stats.lognorm(s=math.sqrt(p[1]), scale=math.exp(p[0]))
        if f == "gamma":
            return stats.gamma(a=p[0], scale=1.0 / p[1])
        if f == "generalized_gamma":
            return stats.gengamma(a=p[1], c=p[0], scale=p[2])
        if f == "inverse_gamma":
            return stats.invgamma(a=p[0], scale=p[1])
        if f == "log_gamma":
            return stats.loggamma(c=p[0], loc=-math.log(p[1]))
        return None

    @property
    def support(self) -> tuple[float, float]:
        if self.family in ("normal", "log_gamma"):
            return (-math.inf, math.inf)
        if self.family == "degenerate":
            return (self.params[0], self.params[0])
        return (0.0, math.inf)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "degenerate":
            raise GrowthSdeError("a degenerate law has no density")
        return self._frozen().pdf(x)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "degenerate":
            raise GrowthSdeError("a degenerate law has no density")
        return self._frozen().logpdf(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "degenerate":
            return (x >= self.params[0]).astype(float)
        return self._frozen().cdf(x)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if self.family == "degenerate":
            return np.full_like(p, self.params[0])
        return self._frozen().ppf(p)

    def mean(self) -> float:
        if self.family == "degenerate":
            return self.params[0]
        return float(self._frozen().mean())

    def var(self) -> float:
        if self.family == "degenerate":
            return 0.0
        return float(self._frozen().var())

    def median(self) -> float:
        return float(self.ppf(0.5))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "degenerate":
            return np.full(size, self.params[0])
        return self._frozen().rvs(size=size, random_state=rng)

    def to_json(self) -> str:
        return json.dumps({"family": self.family, "params": self.named_params}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnalyticLaw":
        obj = json.loads(text)
        names = _FAMILY_PARAMS[obj["family"]]
        return cls(obj["family"], tuple(obj["params"][n] for n in names))


@dataclass
class DensityCurve:
    """Density values ``f_values`` on an increasing grid ``x_grid``."""

    x_grid: np.ndarray
    f_values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.f_values = np.asarray(self.f_values, dtype=float)
        if self.x_grid.shape != self.f_values.shape or self.x_grid.ndim != 1:
            raise ValueError("x_grid and f_values must be 1-D of equal length")
        if np.any(np.diff(self.x_grid) <= 0):
            raise ValueError("x_grid must be strictly increasing")

    def mass(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        """Trapezoid mass of the part of the curve inside ``[lo, hi]``."""
        sel = (self.x_grid >= lo) & (self.x_grid <= hi)
        return float(np.trapezoid(self.f_values[sel], self.x_grid[sel]))

    def mean(self) -> float:
        return float(np.trapezoid(self.x_grid * self.f_values, self.x_grid) / self.mass())

    def __call__(self, x):
        return np.interp(x, self.x_grid, self.f_values, left=0.0, right=0.0)

    def to_csv(self, path, meta: dict | None = None) -> None:
        info = {"kind": "density", "columns": "x,f"}
        info.update(meta or {})
        write_csv(path, np.column_stack([self.x_grid, self.f_values]), info, header="x,f")


def write_csv(path, rows: np.ndarray, meta: dict, header: str | None = None) -> None:
    """Write ``rows`` with ``#``-prefixed metadata lines; numbers in round-trip precision."""
    with open(path, "w", newline="\n") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {meta[key]}\n")
        if header:
            fh.write(header + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def path_generator(master_seed: int, stream: int, path_index: int, sub: int = 0) -> np.random.Generator:
    """Counter-based generator for one path.

    ``sub`` selects a secondary substream of the same path (used for the
    extra draws of step halving); ``sub = 0`` is the main increment stream.
    """
    key = (int(master_seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    counter = [0, 0, int(sub) & _MASK64, int(path_index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def worker_count() -> int:
    """Worker threads, capped by the ``GROWTHSDE_THREADS`` environment variable."""
    n = os.cpu_count() or 1
    cap = os.environ.get("GROWTHSDE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def normal_increments(
    grid: TimeGrid, cfg: WienerConfig, start: int, stop: int, stream: int = 0
) -> np.ndarray:
    """Wiener increments ``Normal(0, 2 D dt)`` for paths ``start..stop-1``."""
    sd = math.sqrt(2.0 * cfg.diffusion_d * grid.dt)
    out = np.empty((stop - start, grid.n_steps))
    for row, i in enumerate(range(start, stop)):
        path_generator(cfg.master_seed, stream, i).standard_normal(out=out[row])
    out *= sd
    return out


def map_path_blocks(
    n_paths: int,
    fn: Callable[[int, int], np.ndarray],
    n_steps: int = 1,
    block_size: int | None = None,
    workers: int | None = None,
) -> np.ndarray:
    """Apply ``fn(start, stop)`` to consecutive path blocks and stack the rows.

    Each row only depends on its path index, so the result is the same for any
    block size and worker count.
    """
    if n_paths < 1:
        raise EmptyEnsembleError("n_paths must be at least 1")
    if block_size is None:
        block_size = max(16, min(4096, _BLOCK_BUDGET // max(1, n_steps)))
    bounds = [(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1 or len(bounds) == 1:
        parts = [fn(s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    return np.concatenate(parts, axis=0)


def _stride_for(grid: TimeGrid, record_points: int | None) -> int:
    if record_points is None or record_points >= grid.n_steps + 1:
        return 1
    target = max(1, grid.n_steps // max(1, record_points - 1))
    while grid.n_steps % target:
        target -= 1
    return target


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def sample_wiener(
    grid: TimeGrid,
    cfg: WienerConfig,
    n_paths: int,
    stream: int = 0,
    workers: int | None = None,
    record_points: int | None = None,
) -> PathEnsemble:
    """Wiener paths with ``W(t0) = 0`` and increment variance ``2 D dt``.

    Parameters
    ----------
    record_points : int, optional
        Keep only about this many equally spaced grid columns.
    """
    if n_paths < 1:
        raise EmptyEnsembleError("n_paths must be at least 1")
    stride = _stride_for(grid, record_points)

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        w = np.zeros((stop - start, grid.n_steps + 1))
        np.cumsum(dw, axis=1, out=w[:, 1:])
        return w[:, ::stride]

    values = map_path_blocks(n_paths, block, grid.n_steps, workers=workers)
    return PathEnsemble(grid.coarsen(stride), values, cfg.master_seed, "wiener")


def _in_domain(x, domain):
    lo, hi = domain
    return np.isfinite(x) & (x > lo) & (x < hi)


def euler_maruyama(
    field,
    x0,
    grid: TimeGrid,
    cfg: WienerConfig,
    n_paths: int,
    stream: int = 0,
    max_halvings: int = 30,
    workers: int | None = None,
    record_points: int | None = None,
    drift_fraction: float = 0.5,
) -> PathEnsemble:
    """Explicit Euler-Maruyama for ``dX = a(X,t) dt + b(X,t) dW``.

    A step is rejected when the proposed state leaves the open domain of
    ``field`` or when the drift displacement exceeds ``drift_fraction`` times
    the distance to the nearest finite domain end plus three noise standard
    deviations (drifts with poles at the boundary would otherwise throw
    paths far out).  The same test is applied to the drift at the proposed
    state, so a step cannot land where the next drift step is out of scale.
    ``drift_fraction=inf`` disables the drift test.  A rejected step is split
    in two, the Brownian increment is split by exact bridge sampling, and
    each half is retried.  After ``max_halvings`` levels the path is flagged
    invalid at that step and its remaining values are NaN.

    Parameters
    ----------
    field : CoefficientField
        Needs vectorised ``a(x, t)``, ``b(x, t)`` and a ``domain`` pair.
    x0 : float or ndarray
        Initial state, scalar or one value per path.
    """
    if n_paths < 1:
        raise EmptyEnsembleError("n_paths must be at least 1")
    domain = getattr(field, "domain", (-math.inf, math.inf))
    x0_arr = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,))
    if not np.all(_in_domain(x0_arr, domain)):
        raise ValueError("initial state outside the field's domain")
    stride = _stride_for(grid, record_points)
    dt = grid.dt
    times = grid.times
    var_unit = 2.0 * cfg.diffusion_d

    lo, hi = domain

    def drift_ok(x, drift_step, noise_scale):
        room = np.minimum(x - lo, hi - x)
        return np.abs(drift_step) <= drift_fraction * room + 3.0 * np.abs(noise_scale)

    def acceptable(x, t, h, drift_step, bx, prop):
        inside = _in_domain(prop, domain)
        ok = inside & drift_ok(x, drift_step, bx * math.sqrt(var_unit * h))
        if math.isinf(drift_fraction) or not np.any(ok):
            return ok
        # drift at the landing point, frozen at the step's start time so a
        # pole at the grid's final time is never evaluated
        xp = np.where(ok, prop, x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ap = np.asarray(field.a(xp, t), dtype=float) * h
            bp = np.asarray(field.b(xp, t), dtype=float)
        return ok & drift_ok(xp, ap, bp * math.sqrt(var_unit * h))

    def refine(x, t, h, dw, gen, level):
        # returns (state, ok) after covering [t, t+h] with increment dw
        step = field.a(x, t) * h
        bx = field.b(x, t)
        prop = x + step + bx * dw
        if acceptable(np.asarray(x), t, h, np.asarray(step), np.asarray(bx), np.asarray(prop)):
            return float(prop), True
        if level >= max_halvings:
            return math.nan, False
        half = 0.5 * h
        dw1 = 0.5 * dw + math.sqrt(var_unit * h / 4.0) * gen.standard_normal()
        x1, ok = refine(x, t, half, dw1, gen, level + 1)
        if not ok:
            return math.nan, False
        return refine(x1, t + half, half, dw - dw1, gen, level + 1)

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        m = stop - start
        out = np.empty((m, grid.n_steps // stride + 1 + 1))
        x = x0_arr[start:stop].copy()
        bad_step = np.full(m, -1, dtype=np.int64)
        out[:, 0] = x
        col = 1
        for k in range(grid.n_steps):
            t = times[k]
            step = field.a(x, t) * dt
            bx = field.b(x, t)
            prop = x + step + bx * dw[:, k]
            ok = acceptable(x, t, dt, step, bx, prop) | (bad_step >= 0)
            if not np.all(ok):
                for j in np.flatnonzero(~ok):
                    gen = path_generator(cfg.master_seed, stream, start + j, sub=k + 1)
                    val, good = refine(x[j], t, dt, dw[j, k], gen, 0)
                    prop[j] = val
                    if not good:
                        bad_step[j] = k
            prop[bad_step >= 0] = math.nan
            x = prop
            if (k + 1) % stride == 0:
                out[:, col] = x
                col += 1
        out[:, -1] = bad_step
        return out

    raw = map_path_blocks(n_paths, block, grid.n_steps, workers=workers)
    label = getattr(field, "name", "field")
    return PathEnsemble(
        grid.coarsen(stride), raw[:, :-1], cfg.master_seed, f"euler({label})",
        invalid_step=raw[:, -1].astype(np.int64),
    )


def ks_distance(sample: Sequence[float], law: AnalyticLaw) -> float:
    """Sup distance between the empirical cdf of ``sample`` and ``law.cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise GrowthSdeError("empty sample")
    cdf = law.cdf(x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
