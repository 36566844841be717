"""
Monte Carlo cross-checks
========================

Simulating the controlled surplus gives an estimate of the return of the
barrier rule that shares no algebra with the closed forms. A coupled pair of
paths estimates the effect of a short deviation from the rule.
"""

from eqdividend.mixture import solve_mixture, value
from eqdividend.model import ExpMixtureDiscount, ModelParams
from eqdividend.montecarlo import AutoHorizon, SimConfig, estimate_value, simulate_path, spike_deviation_estimate

params = ModelParams(1.0, 1.0, 0.8)
disc = ExpMixtureDiscount((0.4, 0.6), (0.2, 0.4))
sol = solve_mixture(params, disc)

###############################################################################
# One path. Dividends start once the surplus reaches b.

path = simulate_path(params, sol.strategy, x0=0.5, dt=1e-3, T=5.0, seed=1)
first = (path.dividend_increments > 0).argmax() * 1e-3
print(f"first dividend at t={first:.3f}, ruin at {path.ruin_time}")

###############################################################################
# Value estimates at a few starting points (20k paths to keep this quick).
# The bridge correction accounts for ruin between grid points.

cfg = SimConfig(dt=1e-3, n_paths=20_000, horizon=AutoHorizon(), seed=3, bridge_correction=True)
for x0 in (sol.b / 2, sol.b, 2 * sol.b):
    est = estimate_value(params, disc, sol.strategy, x0, cfg)
    print(f"x0={x0:.3f}  MC={est.mean:.4f} +/- {est.stderr:.4f}  closed form={value(sol, x0):.4f}")

###############################################################################
# Spike deviations: pay l during the first epsilon, then follow the barrier.
# A nonnegative gain (equilibrium minus deviation) means the deviation does
# not help.

for x0 in (sol.b / 2, 2 * sol.b):
    for l in (0.0, 0.8):
        g = spike_deviation_estimate(params, disc, sol, x0, l, 0.02, SimConfig(n_paths=10_000, horizon=30.0, seed=5, bridge_correction=True))
        print(f"x0={x0:.3f} l={l}  gain/eps={g.gain_per_epsilon:+.4f} +/- {g.stderr:.4f}")
