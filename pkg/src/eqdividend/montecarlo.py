"""Monte Carlo estimates of return functions and of spike-deviation gains.

Paths follow the Euler-Maruyama scheme X_{k+1} = X_k + (mu - pi(X_k)) dt
+ sigma sqrt(dt) Z_k, are absorbed at the first grid point with X <= 0, and
dividends are discounted at the left end of each step. Paths are split into
chunks that run on a thread pool; each path draws from its own counter-based
stream, and the final reduction runs over the full per-path array in path
order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels as K
from .model import (
    BarrierStrategy,
    DiscountSpec,
    ExpMixtureDiscount,
    ModelParams,
    PseudoExpDiscount,
    TabulatedDiscount,
    ValidationError,
)

CHUNK = 2048
DEFAULT_RELATIVE_TOL = 1e-6


@dataclass(frozen=True)
class AutoHorizon:
    """Pick T so that M * integral_T^inf h <= tol.

    With ``tol=None`` the tolerance is ``relative`` times the total payoff
    bound M * integral_0^inf h.
    """

    tol: float | None = None
    relative: float = DEFAULT_RELATIVE_TOL

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0.0:
            raise ValidationError("horizon.tol", "must be > 0")
        if not self.relative > 0.0:
            raise ValidationError("horizon.relative", "must be > 0")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    n_paths: int = 100_000
    horizon: Union[float, AutoHorizon] = AutoHorizon()
    seed: int = 0
    bridge_correction: bool = False
    workers: int | None = None  # None: one per CPU

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValidationError("dt", "must be > 0")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValidationError("n_paths", "must be an integer >= 1")
        if not isinstance(self.horizon, AutoHorizon) and not float(self.horizon) > 0.0:
            raise ValidationError("horizon", "must be > 0 or AutoHorizon")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("workers", "must be >= 1")


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    stderr: float
    n_paths: int
    truncation_bound: float
    horizon: float = 0.0
    dt: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "truncation_bound": self.truncation_bound,
            "horizon": self.horizon,
            "dt": self.dt,
        }


@dataclass(frozen=True)
class SpikeEstimate:
    gain_per_epsilon: float
    stderr: float
    n_paths: int
    open_fraction: float
    truncation_bound: float

    def to_dict(self) -> dict:
        return {
            "gain_per_epsilon": self.gain_per_epsilon,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "open_fraction": self.open_fraction,
            "truncation_bound": self.truncation_bound,
        }


@dataclass(frozen=True)
class PathResult:
    times: np.ndarray
    surplus: np.ndarray
    dividend_increments: np.ndarray  # pi(X_k) dt, undiscounted
    ruin_time: float | None


def _scan_step(disc: DiscountSpec) -> float:
    if isinstance(disc, (ExpMixtureDiscount, PseudoExpDiscount)):
        return 1.0 / disc.min_rate
    return disc.t_max / 100.0


def horizon_for_tolerance(disc: DiscountSpec, M: float, tol: float) -> float:
    """Smallest T on the grid {0, 1/delta_min, 2/delta_min, ...} with M * tail(T) <= tol."""
    if not tol > 0.0:
        raise ValidationError("tol", "must be > 0")
    step = _scan_step(disc)
    k = 0
    while M * float(disc.tail(k * step)) > tol:
        k += 1
        if isinstance(disc, TabulatedDiscount) and k * step > disc.t_max:
            raise ValidationError("horizon", "tolerance not reached within the tabulated range")
        if k > 10**7:
            raise ValidationError("tol", "tolerance is unreachable")
    return k * step


def resolve_horizon(disc: DiscountSpec, M: float, horizon) -> float:
    if isinstance(horizon, AutoHorizon):
        tol = horizon.tol if horizon.tol is not None else horizon.relative * M * float(disc.tail(0.0))
        return horizon_for_tolerance(disc, M, tol)
    T = float(horizon)
    disc.tail(T)  # raises for a tabulated discount without tail bound
    return T


def _discount_grid(disc: DiscountSpec, dt: float, T: float) -> np.ndarray:
    n = int(round(T / dt))
    return np.asarray(disc(np.arange(n) * dt), dtype=float)


def _check_sim_inputs(x0: float, dt: float, T: float):
    if not (x0 > 0.0 and math.isfinite(x0)):
        raise ValidationError("x0", "must be > 0")
    if not dt > 0.0:
        raise ValidationError("dt", "must be > 0")
    if not T > 0.0:
        raise ValidationError("T", "must be > 0")


def simulate_path(
    params: ModelParams,
    strategy: BarrierStrategy,
    x0: float,
    dt: float,
    T: float,
    seed: int = 0,
    path_index: int = 0,
    bridge_correction: bool = False,
) -> PathResult:
    """A single controlled path on the grid k dt, k = 0 .. round(T/dt).

    Uses the same random stream as path ``path_index`` of ``estimate_value``.
    """
    _check_sim_inputs(x0, dt, T)
    n = int(round(T / dt))
    xs, pay, ruin = K.path_kernel(
        float(x0), strategy.b, strategy.rate, params.mu, params.sigma, float(dt), n,
        np.uint64(seed), np.uint64(path_index), bridge_correction, K.ZX, K.ZFX,
    )
    return PathResult(np.arange(n + 1) * dt, xs, pay * dt, None if ruin < 0 else ruin * dt)


def _run_chunks(fn, n_paths: int, workers: int | None):
    starts = list(range(0, n_paths, CHUNK))
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(starts) == 1:
        for s in starts:
            fn(s, min(s + CHUNK, n_paths))
        return
    with ThreadPoolExecutor(max_workers=workers) as ex:
        for f in [ex.submit(fn, s, min(s + CHUNK, n_paths)) for s in starts]:
            f.result()


def _mean_stderr(samples: np.ndarray) -> tuple[float, float]:
    n = samples.size
    mean = math.fsum(samples) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((samples - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_value(
    params: ModelParams,
    disc: DiscountSpec,
    strategy: BarrierStrategy,
    x0: float,
    cfg: SimConfig,
) -> ValueEstimate:
    """E[ sum_k h(k dt) pi(X_k) dt ] up to ruin or the horizon."""
    T = resolve_horizon(disc, params.M, cfg.horizon)
    if not x0 >= 0.0:
        raise ValidationError("x0", "must be >= 0")
    tail = params.M * float(disc.tail(T))
    if T == 0.0 or x0 == 0.0:
        return ValueEstimate(0.0, 0.0, cfg.n_paths, tail, T, cfg.dt)
    h = _discount_grid(disc, cfg.dt, T)
    out = np.zeros(cfg.n_paths)
    seed = np.uint64(cfg.seed)

    def work(a, b):
        K.value_kernel(
            float(x0), strategy.b, strategy.rate, params.mu, params.sigma, cfg.dt, h,
            seed, np.uint64(a), out[a:b], cfg.bridge_correction, K.ZX, K.ZFX,
        )

    _run_chunks(work, cfg.n_paths, cfg.workers)
    mean, se = _mean_stderr(out)
    return ValueEstimate(mean, se, cfg.n_paths, tail, T, cfg.dt)


def spike_deviation_estimate(params: ModelParams, disc: DiscountSpec, sol, x0: float, l: float, epsilon: float, cfg: SimConfig) -> SpikeEstimate:
    """(V^eq - V^spike) / epsilon with common random numbers.

    The spike arm pays the constant rate ``l`` during the first
    round(epsilon/dt) steps (nothing once ruined) and then follows the
    equilibrium barrier. ``truncation_bound`` bounds the effect of cutting
    the still-unmerged pairs at the horizon.
    """
    if not 0.0 <= l <= params.M:
        raise ValidationError("l", f"must lie in [0, {params.M}]")
    if not epsilon > 0.0:
        raise ValidationError("epsilon", "must be > 0")
    n_eps = int(round(epsilon / cfg.dt))
    if n_eps < 1:
        raise ValidationError("epsilon", "must be at least one time step")
    if not x0 >= 0.0:
        raise ValidationError("x0", "must be >= 0")
    T = max(resolve_horizon(disc, params.M, cfg.horizon), n_eps * cfg.dt)
    h = _discount_grid(disc, cfg.dt, T)
    out = np.zeros(cfg.n_paths)
    open_end = np.zeros(cfg.n_paths, dtype=np.bool_)
    seed = np.uint64(cfg.seed)
    strategy = sol.strategy

    def work(a, b):
        K.spike_kernel(
            float(x0), strategy.b, params.M, float(l), n_eps, params.mu, params.sigma, cfg.dt, h,
            seed, np.uint64(a), out[a:b], open_end[a:b], cfg.bridge_correction, K.ZX, K.ZFX,
        )

    _run_chunks(work, cfg.n_paths, cfg.workers)
    eps = n_eps * cfg.dt
    mean, se = _mean_stderr(out)
    frac = float(np.count_nonzero(open_end)) / cfg.n_paths
    bound = params.M * float(disc.tail(T)) * frac / eps
    return SpikeEstimate(mean / eps, se / eps, cfg.n_paths, frac, bound)
