import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from eqdividend.mixture import Case, F_eval, solve_mixture
from eqdividend.model import (
    ExpMixtureDiscount,
    ModelParams,
    PseudoExpDiscount,
    ThetaTriple,
    characteristic_roots,
    discount_eval,
    discount_tail_integral,
    find_root_bracketed,
)
from eqdividend.pseudo import Region, case_classifier, lemma_a1_quantities, lemma_a1_squared_forms, solve_pseudo
from eqdividend.verify import argmax_policy, hamiltonian, smooth_fit_report

pos = st.floats(0.05, 5.0)
rates = st.floats(0.01, 3.0)
params_st = st.builds(ModelParams, mu=pos, sigma=pos, M=pos)
SETTINGS = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def mixtures(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    r = draw(st.lists(rates, min_size=n, max_size=n))
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    assume(w[-1] >= 0.0)
    return ExpMixtureDiscount(tuple(float(v) for v in w), tuple(r))


@st.composite
def pseudos(draw):
    delta = draw(rates)
    lam = draw(st.floats(0.0, 0.999)) * delta
    return PseudoExpDiscount(lam, delta)


@SETTINGS
@given(eta=st.floats(-5.0, 5.0), c=rates, sigma=pos)
def test_root_residuals(eta, c, sigma):
    p, n = characteristic_roots(eta, c, sigma)
    assert p > 0 and n > 0
    scale = 0.5 * sigma**2 * max(p, n) ** 2 + abs(eta) * max(p, n) + c
    for y in (p, -n):
        assert abs(0.5 * sigma**2 * y * y + eta * y - c) <= 1e-10 * scale


@SETTINGS
@given(params=params_st, delta=rates)
def test_theta_relations(params, delta):
    th = ThetaTriple.of(params, delta)
    # M/delta - 1/theta3 - 1/theta1 < 0
    assert params.M / delta - 1.0 / th.theta3 - 1.0 / th.theta1 < 0.0
    # theta3 is the negative-root magnitude for drift mu - M
    lhs = 0.5 * params.sigma**2 * th.theta3**2 - (params.mu - params.M) * th.theta3
    assert lhs == pytest.approx(delta, rel=1e-9)


@SETTINGS
@given(params=params_st, delta=rates)
def test_lemma_a1_positive(params, delta):
    q1, q2 = lemma_a1_quantities(params, delta)
    s1, s2 = lemma_a1_squared_forms(params, delta)
    assert s1 > 0 and s2 > 0
    assert q2 > 0
    assert q2 == pytest.approx(s2, rel=1e-6)
    # q1 is a difference of close numbers when sigma^2 delta << mu^2
    assert q1 == pytest.approx(s1, rel=1e-6, abs=1e-9 * (params.mu / delta))


@SETTINGS
@given(disc=st.one_of(mixtures(), pseudos()), t=st.lists(st.floats(0.0, 50.0), min_size=2, max_size=10))
def test_discount_monotone_and_tail(disc, t):
    t = np.sort(np.array(t))
    h = discount_eval(disc, t)
    assert np.all(np.diff(h) <= 1e-15)
    assert discount_eval(disc, 0.0) == pytest.approx(1.0, abs=1e-15)
    tails = [discount_tail_integral(disc, float(s)) for s in t]
    assert all(a >= b - 1e-15 for a, b in zip(tails, tails[1:]))


@SETTINGS
@given(params=params_st, disc=mixtures(), b=st.lists(st.floats(0.0, 20.0), min_size=2, max_size=2, unique=True))
def test_F_strictly_decreasing(params, disc, b):
    lo, hi = sorted(b)
    assume(hi - lo > 1e-6)
    f_lo, f_hi = F_eval(lo, params, disc), F_eval(hi, params, disc)
    assert f_lo >= f_hi
    # F approaches its limit like exp(-(theta1 + theta2) b); strictness is only
    # observable while that decay is above rounding level
    gap = sum(
        w * (math.exp(-k * lo) - math.exp(-k * hi))
        for w, k in ((w, sum(characteristic_roots(params.mu, r, params.sigma))) for w, r in zip(disc.weights, disc.rates))
    )
    if gap > 1e-10:
        assert f_lo > f_hi


@SETTINGS
@given(l=st.floats(0.0, 1.0), cx=st.floats(0.0, 3.0), hv=st.floats(0.01, 1.0), M=st.floats(0.01, 2.0))
def test_argmax_maximises_hamiltonian(l, cx, hv, M):
    p = ModelParams(1.0, 1.0, M)
    best = argmax_policy(cx, hv, M)
    assert best in (0.0, M)
    assert hamiltonian(best, cx, 0.3, hv, p) >= hamiltonian(l * M, cx, 0.3, hv, p) - 1e-15


@SETTINGS
@given(a=st.floats(-3.0, -0.1), c=st.floats(0.1, 3.0))
def test_root_finder_deterministic(a, c):
    f = lambda x: math.tanh(x)  # noqa: E731
    r = find_root_bracketed(f, a, c)
    assert abs(r) <= 1e-12
    assert find_root_bracketed(f, a, c) == r


@settings(max_examples=60, deadline=None)
@given(params=params_st, disc=mixtures(max_n=3))
def test_mixture_solution_smooth_fit(params, disc):
    sol = solve_mixture(params, disc)
    if sol.case is Case.BARRIER:
        assert sol.b > 0
        assert max(smooth_fit_report(sol)) <= 1e-8
    else:
        x = np.linspace(1e-3, 10, 50)
        assert np.all(sol.c(0.0, x, 1) < 1.0 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(params=params_st, disc=pseudos())
def test_pseudo_classifier_total(params, disc):
    region = case_classifier(params, disc)
    assert region in (Region.ALWAYS_PAY, Region.BARRIER, Region.UNSUPPORTED)
    if region is Region.BARRIER:
        sol = solve_pseudo(params, disc)
        assert abs(float(sol.c(0.0, sol.b, 1)) - 1.0) <= 1e-8
