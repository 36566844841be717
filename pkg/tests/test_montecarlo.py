import math

import numpy as np
import pytest

from eqdividend import _kernels as K
from eqdividend.mixture import value as mix_value
from eqdividend.model import BarrierStrategy, ExpMixtureDiscount, ModelParams, PseudoExpDiscount, ValidationError
from eqdividend.montecarlo import (
    AutoHorizon,
    SimConfig,
    estimate_value,
    horizon_for_tolerance,
    resolve_horizon,
    simulate_path,
    spike_deviation_estimate,
)
from eqdividend.pseudo import value as pseudo_value

from conftest import MIX_PARAMS, PSEUDO_PARAMS, mixture_disc, pseudo_disc
from oracles import tail_quad


def test_rng_is_counter_based():
    key = K.path_key(np.uint64(7), np.uint64(3))
    a = [K.uniform_at(key, k) for k in range(50)]
    assert a == [K.uniform_at(key, k) for k in range(50)]
    assert all(0.0 < u < 1.0 for u in a)
    assert K.path_key(np.uint64(7), np.uint64(4)) != key


def test_normals_moments():
    z = K.normals(np.uint64(11), np.uint64(0), 200_000, K.ZX, K.ZFX)
    assert abs(z.mean()) < 5 * 1 / math.sqrt(z.size)
    assert abs(z.var() - 1.0) < 0.02
    assert abs(np.mean(z**3)) < 0.03
    assert abs(np.mean(z**4) - 3.0) < 0.1
    # tail mass beyond the ziggurat base layer
    assert np.mean(np.abs(z) > 3.6541528853610088) == pytest.approx(2 * 1.29e-4, rel=0.6)


def test_deterministic_drift_limit():
    p = ModelParams(1.0, 1e-8, 0.8)
    r = simulate_path(p, BarrierStrategy(0.0, 0.8), 1.0, 1e-3, 2.0)
    assert r.ruin_time is None
    assert r.surplus[-1] == pytest.approx(1.0 + 0.2 * 2.0, abs=1e-6)
    np.testing.assert_allclose(r.dividend_increments, 0.8e-3)


def test_deterministic_climb_to_barrier():
    p = ModelParams(1.0, 1e-8, 0.8)
    r = simulate_path(p, BarrierStrategy(1.0, 0.8), 0.25, 1e-3, 2.0)
    first = np.argmax(r.dividend_increments > 0) * 1e-3
    assert first == pytest.approx((1.0 - 0.25) / 1.0, abs=2e-3)
    # above b the drift is mu - M
    assert r.surplus[-1] == pytest.approx(1.0 + 0.2 * (2.0 - 0.75), abs=2e-3)


def test_path_repeatable_and_indexed():
    s = BarrierStrategy(0.8, 0.8)
    a = simulate_path(MIX_PARAMS, s, 0.5, 1e-3, 3.0, seed=5, path_index=9)
    b = simulate_path(MIX_PARAMS, s, 0.5, 1e-3, 3.0, seed=5, path_index=9)
    c = simulate_path(MIX_PARAMS, s, 0.5, 1e-3, 3.0, seed=5, path_index=10)
    np.testing.assert_array_equal(a.surplus, b.surplus)
    assert not np.array_equal(a.surplus, c.surplus)


def test_path_frozen_after_ruin():
    s = BarrierStrategy(0.5, 0.8)
    for i in range(50):
        r = simulate_path(MIX_PARAMS, s, 0.05, 1e-3, 5.0, seed=1, path_index=i)
        if r.ruin_time is not None:
            k = int(round(r.ruin_time / 1e-3))
            assert np.all(r.surplus[k + 1:] == 0.0)
            assert np.all(r.dividend_increments[k:] == 0.0)
            return
    pytest.fail("no ruined path among 50 starting at 0.05")


def test_path_domain():
    with pytest.raises(ValidationError):
        simulate_path(MIX_PARAMS, BarrierStrategy(1.0, 0.8), 0.0, 1e-3, 1.0)
    with pytest.raises(ValidationError):
        simulate_path(MIX_PARAMS, BarrierStrategy(1.0, 0.8), 1.0, 0.0, 1.0)


def test_horizon_mixture():
    d = mixture_disc(0.4)
    T = horizon_for_tolerance(d, 0.8, 1e-4)
    assert 0.8 * tail_quad(d, T) <= 1e-4
    assert 0.8 * tail_quad(d, T - 5.0) > 1e-4
    assert T % 5.0 == 0.0
    assert T == pytest.approx(5 * math.log(0.8 * 3.5 / 1e-4), abs=5.0)


def test_horizon_trivial_and_pseudo():
    assert horizon_for_tolerance(mixture_disc(0.4), 0.8, 0.8 * 3.5) == 0.0
    T = horizon_for_tolerance(pseudo_disc(0.1), 1.0, 1e-6)
    assert math.exp(-0.8 * T) * ((1 + 0.1 * T) / 0.8 + 0.15625) <= 1e-6
    with pytest.raises(ValidationError):
        horizon_for_tolerance(pseudo_disc(0.1), 1.0, 0.0)


def test_auto_horizon_relative():
    d = mixture_disc(0.4)
    T = resolve_horizon(d, 0.8, AutoHorizon())
    assert 0.8 * d.tail(T) <= 1e-6 * 0.8 * 3.5


def test_config_validation():
    for kw in (dict(dt=0.0), dict(n_paths=0), dict(horizon=-1.0), dict(seed=-1), dict(workers=0)):
        with pytest.raises(ValidationError):
            SimConfig(**kw)


def test_zero_surplus_is_zero():
    sol_b = BarrierStrategy(0.8781, 0.8)
    cfg = SimConfig(n_paths=2000, horizon=10.0)
    assert estimate_value(MIX_PARAMS, mixture_disc(0.4), sol_b, 0.0, cfg).mean == 0.0
    # grid-only ruin lets about half the paths escape the first step from 1e-6;
    # the bridge correction restores the continuous-time boundary behaviour
    cfg = SimConfig(n_paths=2000, horizon=10.0, bridge_correction=True)
    tiny = estimate_value(MIX_PARAMS, mixture_disc(0.4), sol_b, 1e-6, cfg)
    assert tiny.mean < 1e-3


def test_worker_count_invariance():
    s = BarrierStrategy(0.8781, 0.8)
    d = mixture_disc(0.4)
    runs = [
        estimate_value(MIX_PARAMS, d, s, 0.9, SimConfig(n_paths=5000, horizon=20.0, seed=3, workers=w))
        for w in (1, 2, 3)
    ]
    assert runs[0] == runs[1] == runs[2]


def test_payoff_bound_and_monotone(mixture_solutions):
    sol = mixture_solutions[0.4]
    cfg = SimConfig(n_paths=4000, horizon=AutoHorizon(tol=1e-3), seed=2)
    e1 = estimate_value(MIX_PARAMS, sol.discount, sol.strategy, 1.0, cfg)
    e2 = estimate_value(MIX_PARAMS, sol.discount, sol.strategy, 2.0, cfg)
    for e in (e1, e2):
        assert e.mean + e.truncation_bound <= 0.8 * 3.5 + 3 * e.stderr
        assert e.stderr >= 0 and e.truncation_bound >= 0
    assert e1.mean < e2.mean + 3 * math.hypot(e1.stderr, e2.stderr)


@pytest.mark.parametrize("key", ["mixture_w0.4", "pseudo_l0.1"])
def test_small_sample_agreement(all_solutions, key):
    # loose version of the full acceptance run; 4000 paths keep it fast
    sol = all_solutions[key]
    params = MIX_PARAMS if key.startswith("mixture") else PSEUDO_PARAMS
    vf = mix_value if key.startswith("mixture") else pseudo_value
    x0 = 2 * sol.b
    e = estimate_value(params, sol.discount, sol.strategy, x0, SimConfig(n_paths=4000, seed=1, bridge_correction=True))
    assert abs(e.mean - vf(sol, x0)) <= 4 * e.stderr + e.truncation_bound + 0.01 * vf(sol, x0)


def test_bridge_changes_only_near_zero():
    # far from 0 the crossing probability underflows and both schemes match
    s = BarrierStrategy(0.0, 0.1)
    p = ModelParams(1.0, 0.2, 0.1)
    d = ExpMixtureDiscount((1.0,), (1.0,))
    cfg = dict(n_paths=500, horizon=5.0, seed=4)
    a = estimate_value(p, d, s, 10.0, SimConfig(**cfg))
    b = estimate_value(p, d, s, 10.0, SimConfig(bridge_correction=True, **cfg))
    assert a == b
    near = dict(cfg, n_paths=3000)
    a = estimate_value(MIX_PARAMS, d, BarrierStrategy(0.5, 0.8), 0.05, SimConfig(**near))
    b = estimate_value(MIX_PARAMS, d, BarrierStrategy(0.5, 0.8), 0.05, SimConfig(bridge_correction=True, **near))
    assert b.mean < a.mean


def test_spike_trivial_cases(mixture_solutions):
    sol = mixture_solutions[0.4]
    cfg = SimConfig(n_paths=2000, horizon=20.0, seed=8)
    # above b with l = M the arms agree until the path first dips below b
    e = spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 4 * sol.b, 0.8, 0.01, cfg)
    assert e.gain_per_epsilon == 0.0 and e.stderr == 0.0
    # below b with l = 0 both arms pay nothing
    e = spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 0.3 * sol.b, 0.0, 0.01, cfg)
    assert abs(e.gain_per_epsilon) <= 1e-12
    e = spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 0.0, 0.4, 0.01, cfg)
    assert e.gain_per_epsilon == 0.0


def test_spike_sign_and_determinism(mixture_solutions):
    sol = mixture_solutions[0.4]
    cfg = SimConfig(n_paths=4000, horizon=AutoHorizon(tol=1e-4), seed=8, bridge_correction=True)
    e = spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 0.5 * sol.b, 0.8, 0.02, cfg)
    # paying below the barrier destroys value
    assert e.gain_per_epsilon > 3 * e.stderr
    again = spike_deviation_estimate(
        MIX_PARAMS, sol.discount, sol, 0.5 * sol.b, 0.8, 0.02, SimConfig(**{**cfg.__dict__, "workers": 1})
    )
    assert again == e


def test_spike_domain(mixture_solutions):
    sol = mixture_solutions[0.4]
    cfg = SimConfig(n_paths=10, horizon=1.0)
    with pytest.raises(ValidationError):
        spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 1.0, 0.9, 0.01, cfg)
    with pytest.raises(ValidationError):
        spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 1.0, 0.4, 0.0, cfg)
    with pytest.raises(ValidationError):
        spike_deviation_estimate(MIX_PARAMS, sol.discount, sol, 1.0, 0.4, 1e-5, cfg)


def test_pseudo_discount_grid_matches():
    d = PseudoExpDiscount(0.1, 0.8)
    assert d(np.array([0.0, 1.0]))[1] == pytest.approx(1.1 * math.exp(-0.8))
