"""
Barriers under the pseudo-exponential discount
==============================================

h(t) = (1 + lambda t) exp(-delta t) puts extra weight on the medium term.
The value splits into two pieces, one of which feeds the other, and the
barrier is the first verified root of a scaled scalar function G.
"""

import numpy as np

from eqdividend.model import ModelParams, PseudoExpDiscount
from eqdividend.pseudo import (
    G_at_zero,
    G_eval,
    case_classifier,
    lambda_bounds,
    lemma_a1_quantities,
    lemma_b1_quantity,
    solve_pseudo,
    value,
)

params = ModelParams(mu=1.0, sigma=1.0, M=1.0)
delta = 0.8

q1, q2 = lemma_a1_quantities(params, delta)
lower, upper, upper_concave = lambda_bounds(params, delta)
print(f"q1={q1:.6f}  q2={q2:.6f}")
print(f"lambda window for a positive root: ({lower:.4f}, {upper:.4f}); sufficient for concavity: < {upper_concave:.4f}")

###############################################################################
# Classification and the barrier for three values of lambda.

for lam in (0.0, 0.1, 0.2):
    disc = PseudoExpDiscount(lam, delta)
    sol = solve_pseudo(params, disc)
    print(
        f"lambda={lam:.1f}  region={case_classifier(params, disc).value:8s}  G(0)={G_at_zero(params, disc):+.4f}  "
        f"b={sol.b:.6f}  concavity bound holds={sol.concavity_bound_holds}  B.1 quantity={lemma_b1_quantity(sol):.4f}"
    )

###############################################################################
# G changes sign once on the scan grid for these parameters.

disc = PseudoExpDiscount(0.1, delta)
for b in np.linspace(0.0, 1.0, 11):
    print(f"G({b:.1f}) = {G_eval(b, params, disc):+.5f}")

sol = solve_pseudo(params, disc)
x = np.linspace(0.0, 3.0, 7)
print(np.column_stack([x, value(sol, x)]))
