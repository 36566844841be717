"""
Checking a solution against the equilibrium HJB system
======================================================

A closed-form solution is only as good as the conditions it satisfies.
The verifier evaluates the PDE residual on a (u, x) grid, the ODE residuals
of each component, the smooth-fit gaps at the barrier and the sign
conditions on c_x and c_xx.
"""

import dataclasses
import json

from eqdividend.mixture import solve_mixture
from eqdividend.model import ExpMixtureDiscount, ModelParams, PseudoExpDiscount
from eqdividend.pseudo import solve_pseudo
from eqdividend.verify import smooth_fit_report, transversality_envelope, transversality_probe, verify_solution

mix = solve_mixture(ModelParams(1.0, 1.0, 0.8), ExpMixtureDiscount((0.4, 0.6), (0.2, 0.4)))
ps = solve_pseudo(ModelParams(1.0, 1.0, 1.0), PseudoExpDiscount(0.1, 0.8))

for sol in (mix, ps):
    print(json.dumps(verify_solution(sol).to_dict(), indent=1))

###############################################################################
# Moving the barrier by 1e-3 keeps value and slope continuous (the
# coefficients are rebuilt from b) but breaks the marginal condition.

from eqdividend.mixture import solution_at_barrier

moved = solution_at_barrier(mix.params, mix.discount, mix.b + 1e-3)
print("gaps at b + 1e-3:", smooth_fit_report(moved))

###############################################################################
# Perturbing a stored coefficient shows up in the smooth-fit gaps.

bad = dataclasses.replace(mix, C=(mix.C[0] * 1.01, mix.C[1]))
print("gaps with C_1 off by 1%:", smooth_fit_report(bad))

###############################################################################
# The discounted value decays in the time-to-go u.

for u in (0.0, 10.0, 40.0, 80.0):
    print(f"u={u:5.1f}  sup|c|={transversality_probe(mix, u, 50.0):.3e}  envelope={transversality_envelope(mix, u):.3e}")
