"""Independent checks of a solved equilibrium: HJB and ODE residuals, smooth
fit at the barrier, the threshold/concavity properties and decay in time.

Everything here works from the closed-form derivatives exposed by the
solution objects, never from the equations used to construct them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .mixture import Case, MixtureSolution
from .model import CaseError, ModelParams, ValidationError
from .pseudo import PseudoSolution

Solution = Union[MixtureSolution, PseudoSolution]

BAND = 1e-8  # residual checks skip |x - b| < BAND / 2
HJB_TOL = 1e-8
ODE_TOL = 1e-8
GAP_TOL = 1e-9


def hamiltonian(l: float, p: float, P: float, h_val: float, params: ModelParams) -> float:
    if not 0.0 <= l <= params.M:
        raise ValidationError("l", f"control must lie in [0, {params.M}], got {l!r}")
    return 0.5 * params.sigma**2 * P + (params.mu - l) * p + h_val * l


def argmax_policy(p: float, h_val: float, M: float) -> float:
    """Bang-bang maximiser of the Hamiltonian; a tie pays nothing."""
    return 0.0 if p >= h_val else M


def default_grids(sol: Solution, n_x: int = 10_000, n_u: int = 50):
    x_max = sol.b + 10.0 / sol.decay_theta
    x = np.linspace(0.0, x_max, n_x + 1)[1:]
    u = np.linspace(0.0, 20.0 / sol.min_rate, n_u)
    return u, x


def _off_barrier(sol: Solution, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    keep = (x > 0.0) & (np.abs(x - sol.b) >= 0.5 * BAND)
    if sol.case is Case.ALWAYS_PAY:
        keep = x > 0.0
    return x[keep]


def hjb_residual(sol: Solution, u, x) -> float:
    """max |PDE residual| over the tensor grid u x x (points near b dropped)."""
    p = sol.params
    u = np.asarray(u, dtype=float)[:, None]
    x = _off_barrier(sol, x)
    worst = 0.0
    for branch, xs in (("lower", x[x < sol.b]), ("upper", x[x >= sol.b])):
        if xs.size == 0:
            continue
        xs = xs[None, :]
        c_x = sol.c(u, xs, 1, branch)
        c_xx = sol.c(u, xs, 2, branch)
        r = sol.c_u(u, xs, branch) + 0.5 * p.sigma**2 * c_xx
        if branch == "lower":
            r = r + p.mu * c_x
        else:
            r = r + (p.mu - p.M) * c_x + sol.h(u) * p.M
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def _ode_terms(sol: Solution, x: np.ndarray):
    """Yield (residual array, scale) for every component ODE."""
    p = sol.params
    s2 = p.sigma**2
    for branch, xs in (("lower", x[x < sol.b]), ("upper", x[x >= sol.b])):
        if xs.size == 0:
            continue
        drift = p.mu if branch == "lower" else p.mu - p.M
        src = 0.0 if branch == "lower" else p.M
        if isinstance(sol, MixtureSolution):
            for i, dl in enumerate(sol.discount.rates):
                V = [sol.component(i, xs, k, branch) for k in range(3)]
                yield 0.5 * s2 * V[2] + drift * V[1] - dl * V[0] + src, max(1.0, p.M / dl)
        else:
            dl, lam = sol.discount.delta, sol.discount.lam
            V3 = [sol.V3(xs, k, branch) for k in range(3)]
            V4 = [sol.V4(xs, k, branch) for k in range(3)]
            scale = max(1.0, p.M / dl)
            yield 0.5 * s2 * V3[2] + drift * V3[1] - dl * V3[0] + src, scale
            yield 0.5 * s2 * V4[2] + drift * V4[1] - dl * V4[0] + lam * V3[0] + src, scale


def ode_residual(sol: Solution, x) -> float:
    """max |ODE residual| / max(1, M/delta) over all component equations."""
    x = _off_barrier(sol, x)
    return max(float(np.max(np.abs(r))) / s for r, s in _ode_terms(sol, x))


def _component_values(sol: Solution, x: float, order: int, branch: str):
    if isinstance(sol, MixtureSolution):
        return [float(sol.component(i, x, order, branch)) for i in range(sol.discount.n)]
    return [float(sol.V3(x, order, branch)), float(sol.V4(x, order, branch))]


def smooth_fit_report(sol: Solution) -> tuple[float, float, float]:
    """(value gap, slope gap, |c_x(t, t, b) - 1|); component gaps are maxima."""
    if sol.case is not Case.BARRIER:
        raise CaseError("smooth fit is only defined for a barrier solution")
    b = sol.b
    gaps = []
    for order in (0, 1):
        lo = _component_values(sol, b, order, "lower")
        hi = _component_values(sol, b, order, "upper")
        gaps.append(max(abs(a - c) for a, c in zip(lo, hi)))
    marginal = abs(float(sol.c(0.0, b, 1, "upper")) - 1.0)
    return gaps[0], gaps[1], marginal


def threshold_and_concavity(sol: Solution, x) -> tuple[int, int]:
    x = _off_barrier(sol, x)
    cx = sol.c(0.0, x, 1)
    cxx = sol.c(0.0, x, 2)
    below = x < sol.b
    thr = int(np.count_nonzero(below & (cx < 1.0)) + np.count_nonzero(~below & (cx >= 1.0)))
    conc = int(np.count_nonzero(~(cxx < 0.0)))
    return thr, conc


def transversality_probe(sol: Solution, u_max: float, x_max: float, n: int = 1000) -> float:
    """sup_x |c(s, s + u_max, x)| over a grid of [0, x_max]."""
    if u_max < 0.0 or x_max <= 0.0:
        raise ValidationError("u_max", "need u_max >= 0 and x_max > 0")
    x = np.linspace(0.0, x_max, n)
    return float(np.max(np.abs(sol.c(u_max, x))))


def transversality_envelope(sol: Solution, u: float) -> float:
    """Analytic bound on sup_x |c(s, s + u, x)|."""
    M = sol.params.M
    if isinstance(sol, MixtureSolution):
        return math.fsum(
            w * math.exp(-dl * u) * M / dl for w, dl in zip(sol.discount.weights, sol.discount.rates)
        )
    dl, lam = sol.discount.delta, sol.discount.lam
    return math.exp(-dl * u) * (1.0 + lam * u) * (M / dl) * (1.0 + lam / dl)


@dataclass(frozen=True)
class VerificationReport:
    max_hjb_residual: float
    max_ode_residual: float
    smooth_fit_residuals: tuple
    threshold_violations: int
    concavity_violations: int
    grid: dict

    @property
    def passed(self) -> bool:
        return (
            self.max_hjb_residual <= HJB_TOL
            and self.max_ode_residual <= ODE_TOL
            and all(g <= GAP_TOL for g in self.smooth_fit_residuals)
            and self.threshold_violations == 0
            and self.concavity_violations == 0
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["smooth_fit_residuals"] = dict(
            zip(("value_gap", "derivative_gap", "marginal_gap"), self.smooth_fit_residuals)
        )
        out["passed"] = self.passed
        return out


def verify_solution(sol: Solution, n_x: int = 10_000, n_u: int = 50) -> VerificationReport:
    u, x = default_grids(sol, n_x, n_u)
    gaps = smooth_fit_report(sol) if sol.case is Case.BARRIER else (0.0, 0.0, 0.0)
    thr, conc = threshold_and_concavity(sol, x)
    return VerificationReport(
        max_hjb_residual=hjb_residual(sol, u, x),
        max_ode_residual=ode_residual(sol, x),
        smooth_fit_residuals=tuple(gaps),
        threshold_violations=thr,
        concavity_violations=conc,
        grid={
            "x_min": float(x[0]), "x_max": float(x[-1]), "n_x": int(x.size),
            "u_min": float(u[0]), "u_max": float(u[-1]), "n_u": int(u.size),
            "barrier_band": BAND,
        },
    )
