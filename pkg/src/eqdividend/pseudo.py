"""Equilibrium barrier strategy for the pseudo-exponential discount
h(t) = (1 + lam t) exp(-delta t).

The equilibrium function has the form
c(s, t, x) = exp(-delta u) (lam u V3(x) + V4(x)),  u = t - s,
where V3 is the single-exponential value of the barrier strategy and V4
solves the same two-regime ODE with the extra source lam V3. The barrier is
a zero of G, obtained by inserting the smooth-fit coefficients into the
marginal condition V4'(b) = 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mixture import Case
from .model import (
    BarrierStrategy,
    CaseError,
    ModelParams,
    NumericalFailure,
    PseudoExpDiscount,
    ThetaTriple,
    UnsupportedRegionError,
    ValidationError,
    find_root_bracketed,
)

CRITICAL_TOL = 1e-12
ROOT_TOL = 1e-12
SCAN_STEP = 0.01  # in units of sigma^2 / mu
SCAN_CAP = 50.0  # idem; beyond this every exponential in scaled G is below e^-100
CONSISTENCY_RTOL = 1e-9
THRESHOLD_TOL = 1e-9


class Region(str, enum.Enum):
    ALWAYS_PAY = "AlwaysPay"
    BARRIER = "Barrier"
    UNSUPPORTED = "Unsupported"


def lemma_a1_quantities(params: ModelParams, delta: float) -> tuple[float, float]:
    """theta1/delta - 1/(mu + sigma^2 theta1) and 1/(mu - M - sigma^2 theta3) + theta3/delta.

    Both are positive; they appear as denominators of the lambda bounds.
    """
    th = ThetaTriple.of(params, delta)
    s2 = params.sigma**2
    q1 = th.theta1 / delta - 1.0 / (params.mu + s2 * th.theta1)
    q2 = 1.0 / (params.mu - params.M - s2 * th.theta3) + th.theta3 / delta
    return q1, q2


def lemma_a1_squared_forms(params: ModelParams, delta: float) -> tuple[float, float]:
    """The same two quantities written as perfect squares over positive denominators."""
    s2 = params.sigma**2
    mu, eta = params.mu, params.mu - params.M
    r1 = math.sqrt(mu * mu + 2 * s2 * delta)
    r3 = math.sqrt(eta * eta + 2 * s2 * delta)
    h = math.sqrt(0.5)
    q1 = (h * mu - math.sqrt(0.5 * mu * mu + s2 * delta)) ** 2 / (s2 * delta * r1)
    q2 = (h * eta + math.sqrt(0.5 * eta * eta + s2 * delta)) ** 2 / (s2 * delta * r3)
    return q1, q2


def lambda_bounds(params: ModelParams, delta: float) -> tuple[float, float, float]:
    """(lower, upper) of the existence condition for a positive root of G,
    and the upper bound on lambda that guarantees concavity below the barrier.
    """
    th = ThetaTriple.of(params, delta)
    t1, t2, t3 = th.theta1, th.theta2, th.theta3
    M = params.M
    q1, q2 = lemma_a1_quantities(params, delta)
    lower = (delta / M - t3) / q2
    upper = (t1 + t3) * (delta / M * (t1 + t3) - t1 * t3) / (t1**2 * q2 + t3**2 * q1)
    scale = delta**2 / (M * t3)
    upper_b1 = min(
        (t1 + t2) / (t1 + 3 * t2) * scale,
        (t1 + t3) * (t1 + t2) / (2 * t1 * (t1 + 2 * t2)) * scale,
    )
    return lower, upper, upper_b1


def _g0_reduced(params: ModelParams, disc: PseudoExpDiscount) -> float:
    # G(0) / (theta1 + theta2)
    th = ThetaTriple.of(params, disc.delta)
    _, q2 = lemma_a1_quantities(params, disc.delta)
    k = params.M / disc.delta
    return disc.lam * k * q2 + th.theta3 * k - 1.0


def case_classifier(params: ModelParams, disc: PseudoExpDiscount) -> Region:
    if _g0_reduced(params, disc) <= CRITICAL_TOL:
        return Region.ALWAYS_PAY
    _, upper, _ = lambda_bounds(params, disc.delta)
    if disc.lam < upper:
        return Region.BARRIER
    return Region.UNSUPPORTED


class _Pieces:
    """b-dependent quantities shared by G and the solver, with e^{theta1 b} factored out."""

    def __init__(self, params: ModelParams, disc: PseudoExpDiscount):
        self.params, self.disc = params, disc
        self.th = ThetaTriple.of(params, disc.delta)
        s2 = params.sigma**2
        self.r1 = params.mu + s2 * self.th.theta1
        self.r3 = params.mu - params.M - s2 * self.th.theta3
        self.k = params.M / disc.delta
        self.K = (1.0 + disc.lam / disc.delta) * self.k

    def scaled(self, b):
        """q, normalised denominator, ratio, B1 e^{t1 b}, B3 e^{-t3 b}."""
        t1, t2, t3 = self.th.theta1, self.th.theta2, self.th.theta3
        lam = self.disc.lam
        q = np.exp(-(t1 + t2) * b)
        den = (t1 + t3) + (t2 - t3) * q
        ratio = (t1 + t2 * q) / den
        B1s = lam * self.k * t3 / (den * self.r1)
        B3s = lam * self.k * ratio / self.r3
        return q, den, ratio, B1s, B3s

    def G_scaled(self, b):
        t1, t2, t3 = self.th.theta1, self.th.theta2, self.th.theta3
        b = np.asarray(b, dtype=float)
        q, _, _, B1s, B3s = self.scaled(b)
        return (
            -t3 * B1s
            + t3 * B1s * q * q
            + t1 * B3s
            + t2 * B3s * q
            + 2 * (t1 + t2) * t3 * B1s * b * q
            + (t1 * t3 * self.K - (t1 + t3))
            + (t2 * t3 * self.K - (t2 - t3)) * q
        )


def G_eval(b, params: ModelParams, disc: PseudoExpDiscount, scaled: bool = False):
    """G(b); with ``scaled=True`` returns G(b) exp(-theta1 b), which has the
    same sign, stays bounded, and is what the root search uses."""
    if np.any(np.asarray(b) < 0.0):
        raise ValidationError("b", "must be >= 0")
    p = _Pieces(params, disc)
    g = p.G_scaled(b)
    if not scaled:
        with np.errstate(over="ignore"):
            g = g * np.exp(p.th.theta1 * np.asarray(b, dtype=float))
    return float(g) if np.ndim(g) == 0 else g


def G_at_zero(params: ModelParams, disc: PseudoExpDiscount) -> float:
    th = ThetaTriple.of(params, disc.delta)
    return (th.theta1 + th.theta2) * _g0_reduced(params, disc)


def _dexp(A, B, r, x, order):
    # d^n/dx^n [(A + B x) e^{r x}] = e^{r x} (r^n (A + B x) + n r^(n-1) B)
    lin = A + B * x
    if order == 0:
        return np.exp(r * x) * lin
    return np.exp(r * x) * (r**order * lin + order * r ** (order - 1) * B)


@dataclass(frozen=True)
class PseudoSolution:
    params: ModelParams
    discount: PseudoExpDiscount
    case: Case
    b: float
    theta: ThetaTriple
    C: float
    d: float
    Chat: float
    B1: float
    B3: float
    D3: float
    concavity_bound_holds: bool = True

    @property
    def K(self) -> float:
        return (1.0 + self.discount.lam / self.discount.delta) * self.params.M / self.discount.delta

    def V3(self, x, order: int = 0, branch: str | None = None):
        x = np.asarray(x, dtype=float)
        t1, t2, t3 = self.theta.theta1, self.theta.theta2, self.theta.theta3

        def lower(x):
            return self.C * (t1**order * np.exp(t1 * x) - (-t2) ** order * np.exp(-t2 * x))

        def upper(x):
            out = -self.d * (-t3) ** order * np.exp(-t3 * x)
            return out + (self.params.M / self.discount.delta if order == 0 else 0.0)

        return self._pick(x, lower, upper, branch)

    def V4(self, x, order: int = 0, branch: str | None = None):
        x = np.asarray(x, dtype=float)
        t1, t2, t3 = self.theta.theta1, self.theta.theta2, self.theta.theta3

        def lower(x):
            return _dexp(self.Chat, -self.B1, t1, x, order) + _dexp(-self.Chat, -self.B1, -t2, x, order)

        def upper(x):
            return _dexp(self.D3, self.B3, -t3, x, order) + (self.K if order == 0 else 0.0)

        return self._pick(x, lower, upper, branch)

    def _pick(self, x, lower, upper, branch):
        if branch == "lower":
            return lower(x)
        if branch == "upper":
            return upper(x)
        below = x < self.b
        out = upper(x)
        if np.any(below):
            out = np.where(below, lower(np.where(below, x, 0.0)), out)
        return out

    # -- c(s, t, x) with u = t - s -------------------------------------------

    def h(self, u):
        return self.discount(u)

    def c(self, u, x, order: int = 0, branch: str | None = None):
        u = np.asarray(u, dtype=float)
        lam, delta = self.discount.lam, self.discount.delta
        return np.exp(-delta * u) * (lam * u * self.V3(x, order, branch) + self.V4(x, order, branch))

    def c_u(self, u, x, branch: str | None = None):
        u = np.asarray(u, dtype=float)
        lam, delta = self.discount.lam, self.discount.delta
        return -delta * self.c(u, x, 0, branch) + lam * np.exp(-delta * u) * self.V3(x, 0, branch)

    @property
    def strategy(self) -> BarrierStrategy:
        return BarrierStrategy(self.b, self.params.M)

    @property
    def decay_theta(self) -> float:
        return self.theta.theta3

    @property
    def min_rate(self) -> float:
        return self.discount.delta

    def to_dict(self) -> dict:
        return {
            "model": "pseudo_exp",
            "case": self.case.value,
            "b": self.b,
            "coefficients": {
                "C": self.C, "d": self.d, "Chat": self.Chat,
                "B1": self.B1, "B3": self.B3, "D3": self.D3,
            },
            "thetas": [self.theta.theta1, self.theta.theta2, self.theta.theta3],
            "concavity_bound_holds": self.concavity_bound_holds,
        }


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValidationError("x", "surplus must be >= 0")
    return x


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def coefficients_at(b: float, params: ModelParams, disc: PseudoExpDiscount) -> dict:
    """Every coefficient implied by a candidate barrier ``b``.

    Chat and D3 come in two versions: the canonical ones from V4'(b) = 1
    and the ones from value/slope continuity of V4. They coincide exactly
    when G(b) = 0.
    """
    p = _Pieces(params, disc)
    t1, t2, t3 = p.th.theta1, p.th.theta2, p.th.theta3
    lam, M, delta = disc.lam, params.M, disc.delta
    e1, e2, e3 = math.exp(t1 * b), math.exp(-t2 * b), math.exp(-t3 * b)
    den = (t1 + t3) * e1 + (t2 - t3) * e2
    C = M * t3 / delta / den
    d = M / delta / e3 * (t1 * e1 + t2 * e2) / den
    B1 = lam * C / p.r1
    B3 = lam * d / p.r3
    K = p.K
    Chat = (1.0 + (t1 * b + 1.0) * B1 * e1 - (t2 * b - 1.0) * B1 * e2) / (t1 * e1 + t2 * e2)
    D3 = (B3 - 1.0 / e3) / t3 - B3 * b
    Chat_fit = (
        ((t1 + t3) * b + 1.0) * B1 * e1 - ((t2 - t3) * b - 1.0) * B1 * e2 + B3 * e3 + t3 * K
    ) / den
    D3_fit = ((Chat_fit - B1 * b) * e1 - (Chat_fit + B1 * b) * e2 - K) / e3 - B3 * b
    return dict(C=C, d=d, B1=B1, B3=B3, Chat=Chat, D3=D3, Chat_fit=Chat_fit, D3_fit=D3_fit)


def _always_pay(params: ModelParams, disc: PseudoExpDiscount, th: ThetaTriple, bound_ok: bool):
    p = _Pieces(params, disc)
    d = params.M / disc.delta
    return PseudoSolution(
        params, disc, Case.ALWAYS_PAY, 0.0, th,
        C=0.0, d=d, Chat=0.0, B1=0.0, B3=disc.lam * d / p.r3, D3=-p.K,
        concavity_bound_holds=bound_ok,
    )


def solution_at_barrier(
    params: ModelParams, disc: PseudoExpDiscount, b: float, co: dict | None = None
) -> PseudoSolution:
    """Barrier-case solution built from the canonical coefficient formulas at ``b``."""
    co = co or coefficients_at(b, params, disc)
    _, _, upper_b1 = lambda_bounds(params, disc.delta)
    return PseudoSolution(
        params, disc, Case.BARRIER, b, ThetaTriple.of(params, disc.delta),
        C=co["C"], d=co["d"], Chat=co["Chat"], B1=co["B1"], B3=co["B3"], D3=co["D3"],
        concavity_bound_holds=disc.lam <= upper_b1,
    )


def threshold_ok(sol: PseudoSolution, n: int = 2000) -> bool:
    b, t3 = sol.b, sol.theta.theta3
    below = np.linspace(0.0, b, n, endpoint=False)
    above = b + np.linspace(0.0, 10.0 / t3, n + 1)[1:]
    return bool(
        np.all(sol.V4(below, 1) >= 1.0 - THRESHOLD_TOL) and np.all(sol.V4(above, 1) < 1.0 + THRESHOLD_TOL)
    )


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= CONSISTENCY_RTOL * max(1.0, abs(a), abs(b))


def solve_pseudo(params: ModelParams, disc: PseudoExpDiscount) -> PseudoSolution:
    """Equilibrium solution; raises UnsupportedRegionError outside the known cases.

    Positive roots of G are visited in increasing order; the first one whose
    value function has V4' >= 1 below and < 1 above the barrier is returned.
    """
    region = case_classifier(params, disc)
    th = ThetaTriple.of(params, disc.delta)
    _, _, upper_b1 = lambda_bounds(params, disc.delta)
    bound_ok = disc.lam <= upper_b1
    if region is Region.UNSUPPORTED:
        raise UnsupportedRegionError(
            f"lambda={disc.lam} lies outside both the always-pay and the barrier regions"
        )
    if region is Region.ALWAYS_PAY:
        return _always_pay(params, disc, th, bound_ok)

    pieces = _Pieces(params, disc)
    step = SCAN_STEP * params.length_scale
    grid = step * np.arange(0, int(round(SCAN_CAP / SCAN_STEP)) + 1)
    g = pieces.G_scaled(grid)
    if not np.all(np.isfinite(g)):
        raise NumericalFailure("G is not finite on the scan grid")
    changes = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
    if changes.size == 0:
        raise NumericalFailure("G has no sign change on the scanned range")
    for k in changes:
        b = find_root_bracketed(lambda v: float(pieces.G_scaled(v)), grid[k], grid[k + 1], tol=ROOT_TOL)
        if b <= 0.0:
            continue
        co = coefficients_at(b, params, disc)
        if not (_close(co["Chat"], co["Chat_fit"]) and _close(co["D3"], co["D3_fit"])):
            raise NumericalFailure(
                f"smooth-fit cross-check failed at b={b}: Chat {co['Chat']} vs {co['Chat_fit']}, "
                f"D3 {co['D3']} vs {co['D3_fit']}"
            )
        sol = solution_at_barrier(params, disc, b, co)
        if threshold_ok(sol):
            return sol
    raise NumericalFailure("no root of G satisfies the threshold property")


def V3_eval(sol: PseudoSolution, x):
    return _scalar(sol.V3(_check_x(x)))


def V4_eval(sol: PseudoSolution, x):
    return _scalar(sol.V4(_check_x(x)))


def value(sol: PseudoSolution, x):
    return _scalar(sol.V4(_check_x(x)))


def value_st(sol: PseudoSolution, u, x):
    if np.any(np.asarray(u) < 0.0):
        raise ValidationError("u", "elapsed time must be >= 0")
    return _scalar(sol.c(u, _check_x(x)))


def value_derivatives(sol: PseudoSolution, x):
    x = _check_x(x)
    return _scalar(sol.V4(x, 1)), _scalar(sol.V4(x, 2))


def lemma_b1_quantity(sol: PseudoSolution) -> float:
    """theta1 Chat - 3 B1 - theta1 B1 b; positive => V4''' > 0 below the barrier."""
    if sol.case is not Case.BARRIER:
        raise CaseError("quantity is only defined for a barrier solution")
    t1 = sol.theta.theta1
    return t1 * sol.Chat - 3.0 * sol.B1 - t1 * sol.B1 * sol.b


def lemma_b1_factored(sol: PseudoSolution) -> float:
    """The same quantity through q(b) over its positive denominator."""
    if sol.case is not Case.BARRIER:
        raise CaseError("quantity is only defined for a barrier solution")
    p = _Pieces(sol.params, sol.discount)
    t1, t2, t3 = sol.theta.theta1, sol.theta.theta2, sol.theta.theta3
    b = sol.b
    a = sol.discount.lam / p.r1 * sol.params.M * t3 / sol.discount.delta
    q = t1 * (t1 + t3 - 2 * a) * math.exp((t1 + t2) * b) + (
        t1 * (t2 - t3) + a * (-2 * t1 * t2 * b + t1 - 3 * t2)
    )
    den = (
        math.exp(t2 * b)
        * (t1 * math.exp(t1 * b) + t2 * math.exp(-t2 * b))
        * ((t1 + t3) * math.exp(t1 * b) + (t2 - t3) * math.exp(-t2 * b))
    )
    return q / den
