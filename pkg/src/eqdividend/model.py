"""Model primitives: surplus parameters, discount functions, characteristic
roots, barrier strategies and the bracketed root finder used by both solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.optimize import brentq

WEIGHT_SUM_TOL = 1e-12


class EqDivError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EqDivError, ValueError):
    """An input violates a documented invariant.

    ``field`` names the offending attribute so callers (the CLI in
    particular) can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnsupportedRegionError(EqDivError):
    """Parameters fall outside every case for which a solution is known."""


class NumericalFailure(EqDivError, RuntimeError):
    pass


class NoSignChangeError(NumericalFailure):
    pass


class NonFiniteValueError(NumericalFailure):
    pass


class CaseError(EqDivError):
    """Operation requested on a solution of the wrong case."""


def _finite_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(name, f"must be a finite positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Drift ``mu``, volatility ``sigma`` and dividend-rate cap ``M``."""

    mu: float
    sigma: float
    M: float

    def __post_init__(self):
        for name in ("mu", "sigma", "M"):
            object.__setattr__(self, name, _finite_positive(name, getattr(self, name)))

    @property
    def length_scale(self) -> float:
        """sigma^2 / mu, the natural surplus scale used for bracketing."""
        return self.sigma**2 / self.mu


@dataclass(frozen=True)
class ExpMixtureDiscount:
    """h(t) = sum_i w_i exp(-delta_i t).

    Zero weights are accepted so that the degenerate members of a family
    (e.g. w = (1, 0)) can be expressed; they contribute nothing.
    """

    weights: tuple
    rates: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        r = tuple(float(v) for v in self.rates)
        if len(w) == 0:
            raise ValidationError("weights", "at least one component is required")
        if len(w) != len(r):
            raise ValidationError("rates", f"length {len(r)} does not match weights length {len(w)}")
        for i, v in enumerate(w):
            if not math.isfinite(v) or v < 0.0:
                raise ValidationError(f"weights[{i}]", f"must be >= 0, got {v!r}")
        for i, v in enumerate(r):
            _finite_positive(f"rates[{i}]", v)
        if abs(math.fsum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError("weights", f"must sum to 1 (got {math.fsum(w)!r})")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def min_rate(self) -> float:
        return min(d for w, d in zip(self.weights, self.rates) if w > 0.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum(w * np.exp(-d * t) for w, d in zip(self.weights, self.rates))

    def tail(self, T):
        T = np.asarray(T, dtype=float)
        return sum(w * np.exp(-d * T) / d for w, d in zip(self.weights, self.rates))


@dataclass(frozen=True)
class PseudoExpDiscount:
    """h(t) = (1 + lam t) exp(-delta t), with 0 <= lam < delta."""

    lam: float
    delta: float

    def __post_init__(self):
        delta = _finite_positive("delta", self.delta)
        lam = float(self.lam)
        if not math.isfinite(lam) or lam < 0.0:
            raise ValidationError("lambda", f"must be >= 0, got {lam!r}")
        if lam >= delta:
            raise ValidationError("lambda", f"must be < delta={delta} for h to be decreasing")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "delta", delta)

    @property
    def min_rate(self) -> float:
        return self.delta

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + self.lam * t) * np.exp(-self.delta * t)

    def tail(self, T):
        T = np.asarray(T, dtype=float)
        d, lam = self.delta, self.lam
        return np.exp(-d * T) * ((1.0 + lam * T) / d + lam / d**2)


@dataclass(frozen=True)
class TabulatedDiscount:
    """Discount sampled on a grid, linearly interpolated.

    Only the Monte Carlo engine accepts this variant. ``tail_bound(T)`` must
    return an upper bound on the integral of h over [T, inf); without it the
    truncation error of a simulation cannot be certified.
    """

    times: np.ndarray
    values: np.ndarray
    tail_bound: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValidationError("times", "times and values must be 1-D arrays of equal length >= 2")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValidationError("times", "must start at 0 and be strictly increasing")
        if v[0] != 1.0:
            raise ValidationError("values", "h(0) must equal 1")
        if np.any(v < 0.0) or np.any(np.diff(v) > 0.0):
            raise ValidationError("values", "h must be nonnegative and nonincreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_max):
            raise ValidationError("t", f"tabulated discount is only defined up to t={self.t_max}")
        return np.interp(t, self.times, self.values)

    def tail(self, T):
        if self.tail_bound is None:
            raise ValidationError("discount", "tabulated discount has no analytic tail bound")
        return self.tail_bound(float(T))


DiscountSpec = Union[ExpMixtureDiscount, PseudoExpDiscount, TabulatedDiscount]


@dataclass(frozen=True)
class ThetaTriple:
    """theta1 = theta1(mu, delta), theta2 = theta2(mu, delta), theta3 = theta2(mu - M, delta)."""

    theta1: float
    theta2: float
    theta3: float

    @classmethod
    def of(cls, params: ModelParams, delta: float) -> "ThetaTriple":
        t1, t2 = characteristic_roots(params.mu, delta, params.sigma)
        _, t3 = characteristic_roots(params.mu - params.M, delta, params.sigma)
        return cls(t1, t2, t3)


@dataclass(frozen=True)
class BarrierStrategy:
    """Pay nothing below ``b`` and ``rate`` at or above it (never at x = 0)."""

    b: float
    rate: float

    def __post_init__(self):
        if not math.isfinite(self.b) or self.b < 0.0:
            raise ValidationError("b", f"barrier must be >= 0, got {self.b!r}")
        _finite_positive("rate", self.rate)


def characteristic_roots(eta: float, c: float, sigma: float) -> tuple[float, float]:
    """Positive root and magnitude of the negative root of
    ``0.5 sigma^2 y^2 + eta y - c = 0``.

    Each root is computed through the cancellation-free form so that the
    small one keeps full relative precision when |eta| dominates.
    """
    if not (c > 0.0) or not math.isfinite(c):
        raise ValidationError("c", f"rate must be positive, got {c!r}")
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise ValidationError("sigma", f"must be positive, got {sigma!r}")
    s2 = sigma * sigma
    disc = math.sqrt(eta * eta + 2.0 * s2 * c)
    # roots r+ = (-eta + disc)/s2, r- = -(eta + disc)/s2, r+ * r- = -2c/s2
    if eta >= 0.0:
        theta_neg = (eta + disc) / s2
        theta_pos = 2.0 * c / (s2 * theta_neg)
    else:
        theta_pos = (-eta + disc) / s2
        theta_neg = 2.0 * c / (s2 * theta_pos)
    return theta_pos, theta_neg


def discount_eval(spec: DiscountSpec, t):
    if np.any(np.asarray(t) < 0.0):
        raise ValidationError("t", "time must be >= 0")
    out = spec(t)
    return float(out) if np.ndim(out) == 0 else out


def discount_tail_integral(spec: DiscountSpec, T):
    """Integral of h over [T, inf)."""
    if np.any(np.asarray(T) < 0.0):
        raise ValidationError("T", "time must be >= 0")
    out = spec.tail(T)
    return float(out) if np.ndim(out) == 0 else out


def strategy_rate(strategy: BarrierStrategy, x):
    x = np.asarray(x, dtype=float)
    out = np.where((x >= strategy.b) & (x > 0.0), strategy.rate, 0.0)
    return float(out) if out.ndim == 0 else out


def find_root_bracketed(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    maxiter: int = 200,
) -> float:
    """Root of ``f`` inside ``[lo, hi]`` by Brent's safeguarded method.

    Raises NoSignChangeError when the endpoints do not bracket a root and
    NonFiniteValueError as soon as ``f`` returns NaN or an infinity.
    """
    if not tol > 0.0:
        raise ValidationError("tol", "must be positive")

    def g(x):
        y = float(f(x))
        if not math.isfinite(y):
            raise NonFiniteValueError(f"f({x!r}) = {y!r}")
        return y

    flo, fhi = g(lo), g(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0.0:
        raise NoSignChangeError(f"f({lo})={flo:.6g} and f({hi})={fhi:.6g} have the same sign")
    try:
        return float(brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter))
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from exc

