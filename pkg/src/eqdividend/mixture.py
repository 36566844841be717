"""Equilibrium barrier strategy for a mixture of exponential discount functions.

With h(t) = sum_i w_i exp(-delta_i t) the equilibrium function splits as
c(s, t, x) = sum_i w_i exp(-delta_i (t - s)) V_i(x), where each V_i solves a
two-regime linear ODE (no dividends below the barrier b, rate M above it).
Smooth fit gives C_i, d_i as explicit functions of b, and b itself is the
unique zero of a strictly decreasing scalar function F.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    BarrierStrategy,
    ExpMixtureDiscount,
    ModelParams,
    NumericalFailure,
    ThetaTriple,
    ValidationError,
    find_root_bracketed,
)

BRACKET_CAP = 1e6
ROOT_TOL = 1e-12
CRITICAL_TOL = 1e-12


class Case(str, enum.Enum):
    ALWAYS_PAY = "AlwaysPay"
    BARRIER = "Barrier"


def _thetas(params: ModelParams, disc: ExpMixtureDiscount) -> list[ThetaTriple]:
    return [ThetaTriple.of(params, d) for d in disc.rates]


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValidationError("x", "surplus must be >= 0")
    return x


@dataclass(frozen=True)
class MixtureSolution:
    params: ModelParams
    discount: ExpMixtureDiscount
    case: Case
    b: float
    thetas: tuple
    C: tuple
    d: tuple

    # -- per-component pieces -------------------------------------------------

    def _scaled_C(self, i: int) -> float:
        # C_i * exp(theta1 b); bounded for every b
        th = self.thetas[i]
        if self.C[i] > 0.0 and th.theta1 * self.b < 700.0:
            return self.C[i] * math.exp(th.theta1 * self.b)
        # stored C underflowed, rebuild from b
        M, delta = self.params.M, self.discount.rates[i]
        q = math.exp(-(th.theta1 + th.theta2) * self.b)
        return (M * th.theta3 / delta) / ((th.theta1 + th.theta3) + (th.theta2 - th.theta3) * q)

    def component(self, i: int, x, order: int = 0, branch: str | None = None):
        """V_i or its ``order``-th derivative (order <= 3).

        ``branch`` forces the 'lower' ([0, b)) or 'upper' ([b, inf)) formula
        regardless of x; used for one-sided limits at the barrier.
        """
        x = np.asarray(x, dtype=float)
        th = self.thetas[i]
        M, delta = self.params.M, self.discount.rates[i]
        t1, t2, t3 = th.theta1, th.theta2, th.theta3
        b = self.b

        def lower(x):
            if self.case is Case.ALWAYS_PAY:
                return np.full_like(x, np.nan)
            Cs = self._scaled_C(i)
            a = np.exp(t1 * (x - b))
            e = np.exp(-t2 * x - t1 * b)
            return Cs * (t1**order * a - (-t2) ** order * e)

        def upper(x):
            out = -self.d[i] * (-t3) ** order * np.exp(-t3 * x)
            return out + (M / delta if order == 0 else 0.0)

        if branch == "lower":
            return lower(x)
        if branch == "upper":
            return upper(x)
        below = x < b
        out = upper(x)
        if np.any(below):
            out = np.where(below, lower(np.where(below, x, 0.0)), out)
        return out

    # -- c(s, t, x) with u = t - s -------------------------------------------

    def h(self, u):
        return self.discount(u)

    def c(self, u, x, order: int = 0, branch: str | None = None):
        u = np.asarray(u, dtype=float)
        return sum(
            w * np.exp(-dl * u) * self.component(i, x, order, branch)
            for i, (w, dl) in enumerate(zip(self.discount.weights, self.discount.rates))
        )

    def c_u(self, u, x, branch: str | None = None):
        u = np.asarray(u, dtype=float)
        return sum(
            -w * dl * np.exp(-dl * u) * self.component(i, x, 0, branch)
            for i, (w, dl) in enumerate(zip(self.discount.weights, self.discount.rates))
        )

    @property
    def strategy(self) -> BarrierStrategy:
        return BarrierStrategy(self.b, self.params.M)

    @property
    def decay_theta(self) -> float:
        return min(th.theta3 for th in self.thetas)

    @property
    def min_rate(self) -> float:
        return self.discount.min_rate

    def to_dict(self) -> dict:
        return {
            "model": "exp_mixture",
            "case": self.case.value,
            "b": self.b,
            "coefficients": [
                {"weight": w, "delta": dl, "C": C, "d": d}
                for w, dl, C, d in zip(self.discount.weights, self.discount.rates, self.C, self.d)
            ],
            "thetas": [[th.theta1, th.theta2, th.theta3] for th in self.thetas],
        }


def barrier_criterion(params: ModelParams, disc: ExpMixtureDiscount) -> float:
    """sum_i w_i M theta_i3 / delta_i; a barrier exists iff this exceeds 1."""
    return math.fsum(
        w * params.M * th.theta3 / dl
        for w, dl, th in zip(disc.weights, disc.rates, _thetas(params, disc))
    )


def _ratio(th: ThetaTriple, b: float) -> float:
    # (t1 e^{t1 b} + t2 e^{-t2 b}) / ((t1+t3) e^{t1 b} + (t2-t3) e^{-t2 b}), e^{t1 b} factored out
    q = math.exp(-(th.theta1 + th.theta2) * b)
    return (th.theta1 + th.theta2 * q) / ((th.theta1 + th.theta3) + (th.theta2 - th.theta3) * q)


def F_eval(b: float, params: ModelParams, disc: ExpMixtureDiscount) -> float:
    if b < 0.0:
        raise ValidationError("b", "must be >= 0")
    thetas = _thetas(params, disc)
    return math.fsum(
        w * params.M * th.theta3 / dl * _ratio(th, b)
        for w, dl, th in zip(disc.weights, disc.rates, thetas)
    ) - 1.0


def F_limit(params: ModelParams, disc: ExpMixtureDiscount) -> float:
    """F(+inf); negative for every valid parameter set."""
    return math.fsum(
        w * params.M * th.theta3 / dl * th.theta1 / (th.theta1 + th.theta3)
        for w, dl, th in zip(disc.weights, disc.rates, _thetas(params, disc))
    ) - 1.0


def coefficients_from_barrier(b: float, params: ModelParams, disc: ExpMixtureDiscount):
    """(C_i, d_i) solving value and slope continuity of V_i at ``b``."""
    if b < 0.0:
        raise ValidationError("b", "must be >= 0")
    out = []
    for dl, th in zip(disc.rates, _thetas(params, disc)):
        t1, t2, t3 = th.theta1, th.theta2, th.theta3
        den = (t1 + t3) * math.exp(t1 * b) + (t2 - t3) * math.exp(-t2 * b)
        C = params.M * t3 / dl / den
        d = params.M / dl * math.exp(t3 * b) * _ratio(th, b)
        out.append((C, d))
    return out


def solve_mixture(params: ModelParams, disc: ExpMixtureDiscount) -> MixtureSolution:
    thetas = tuple(_thetas(params, disc))
    crit = barrier_criterion(params, disc)
    if crit <= 1.0 + CRITICAL_TOL:
        return MixtureSolution(
            params, disc, Case.ALWAYS_PAY, 0.0, thetas,
            C=tuple(0.0 for _ in disc.rates),
            d=tuple(params.M / dl for dl in disc.rates),
        )

    def f(b):
        return F_eval(b, params, disc)

    lo, hi = 0.0, 1.0
    cap = BRACKET_CAP * params.length_scale
    while f(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise NumericalFailure(f"F has no sign change on [0, {cap:.3g}]")
    return solution_at_barrier(params, disc, find_root_bracketed(f, lo, hi, tol=ROOT_TOL))


def solution_at_barrier(params: ModelParams, disc: ExpMixtureDiscount, b: float) -> MixtureSolution:
    """Barrier-case solution object for an arbitrary ``b`` (smooth fit holds, the marginal condition need not)."""
    coef = coefficients_from_barrier(b, params, disc)
    return MixtureSolution(
        params, disc, Case.BARRIER, b, tuple(_thetas(params, disc)),
        C=tuple(c for c, _ in coef),
        d=tuple(d for _, d in coef),
    )


def value(sol: MixtureSolution, x):
    x = _check_x(x)
    out = sol.c(0.0, x)
    return float(out) if out.ndim == 0 else out


def value_st(sol: MixtureSolution, u, x):
    if np.any(np.asarray(u) < 0.0):
        raise ValidationError("u", "elapsed time must be >= 0")
    x = _check_x(x)
    out = sol.c(u, x)
    return float(out) if np.ndim(out) == 0 else out


def value_derivatives(sol: MixtureSolution, x):
    """(dV/dx, d2V/dx2) on the diagonal s = t."""
    x = _check_x(x)
    vx, vxx = sol.c(0.0, x, 1), sol.c(0.0, x, 2)
    if vx.ndim == 0:
        return float(vx), float(vxx)
    return vx, vxx
