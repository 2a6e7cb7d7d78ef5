"""The 3-level counter-example: trace distance can grow in expectation.

Fidelity between filter and state never decreases in mean, and one might
hope the trace distance never increases.  This embedded instance refutes
that: one jump takes the expected distance from 1 up to 4/3, while the
expected fidelity still gains its guaranteed 1/12.
"""

import numpy as np

from qfilter import (
    conditional_update,
    counterexample_instance,
    counterexample_report,
    fidelity,
    outcome_probs,
    trace_distance,
)

channel, sigma, rho = counterexample_instance()
print("rho   = diag(1/2, 1/2, 0)")
print("sigma = diag(0, 1/2, 1/2)")
print("M_1   = diag(1, 1/sqrt2, 0),  M_2 = diag(0, 1/sqrt2, 1)")

probs = outcome_probs(channel, rho)
print("\njump probabilities from rho:", probs)
for mu in range(2):
    post_rho, _ = conditional_update(channel, mu, rho)
    post_sigma, _ = conditional_update(channel, mu, sigma)
    print(f"\nafter mu={mu + 1}  (weight {probs[mu]:.4g})")
    print("  rho'   =", np.diag(post_rho).real)
    print("  sigma' =", np.diag(post_sigma).real)
    print(f"  D(sigma', rho') = {trace_distance(post_sigma, post_rho):.6f}")
    print(f"  F(sigma', rho') = {fidelity(post_sigma, post_rho):.6f}")

rep = counterexample_report()
print("\nweighted sums over both jumps:")
print(f"  E[D'] = {rep.d_lhs:.12f}  >  D = {rep.d_rhs:.12f}   (super-martingale fails)")
print(f"  E[F'] = {rep.f_lhs:.12f}  >  F = {rep.f_rhs:.12f}   (sub-martingale, gain 1/12)")
print(f"\nrelative entropy: {rep.rel_entropy_note}")
