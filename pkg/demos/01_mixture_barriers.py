"""
Barriers under a mixture of exponential discounts
=================================================

Shareholders who discount at different constant rates produce a weighted
discount function. The equilibrium dividend rule is still a barrier, and
its level solves a scalar equation that is monotone in b.
"""

import numpy as np

from eqdividend.mixture import F_eval, barrier_criterion, solve_mixture, value, value_derivatives
from eqdividend.model import ExpMixtureDiscount, ModelParams

params = ModelParams(mu=1.0, sigma=1.0, M=0.8)

###############################################################################
# The sign of the criterion decides between paying at every level and
# waiting for a barrier.

for w in (0.0, 0.4, 0.7, 1.0):
    disc = ExpMixtureDiscount((w, 1.0 - w), (0.2, 0.4))
    crit = barrier_criterion(params, disc)
    sol = solve_mixture(params, disc)
    print(f"w1={w:.1f}  criterion={crit:.4f}  case={sol.case.value:8s}  b={sol.b:.4f}")

###############################################################################
# F decreases from criterion - 1 to a negative limit, so the root is unique.

disc = ExpMixtureDiscount((0.4, 0.6), (0.2, 0.4))
for b in np.linspace(0.0, 2.0, 9):
    print(f"F({b:.2f}) = {F_eval(b, params, disc):+.5f}")

###############################################################################
# The value function is increasing and concave, with slope 1 at the barrier.

sol = solve_mixture(params, disc)
x = np.array([0.25, 0.5, sol.b, 2.0, 5.0, 20.0])
vx, vxx = value_derivatives(sol, x)
for xi, v, d1, d2 in zip(x, value(sol, x), vx, vxx):
    print(f"x={xi:6.3f}  V={v:.5f}  V'={d1:.5f}  V''={d2:+.5f}")

###############################################################################
# Far above the barrier the value approaches the payoff of paying M forever.

print("V(inf) =", 0.8 * (0.4 / 0.2 + 0.6 / 0.4))
