"""Exact one-step checks: no Monte-Carlo needed.

The conditional expectation of any comparison measure after one jump is a
finite sum over outcome blocks, so the sub-martingale property of fidelity
can be verified exactly, instance by instance -- including coarse-grained
chains where several outcomes are aggregated into partition blocks.
"""

import numpy as np

from qfilter import (
    check_fidelity_submartingale,
    check_kraus_monotonicity,
    check_mean_evolution,
    random_channel,
    random_density,
    random_partition,
    random_search_violation,
)

rng = np.random.default_rng(3)

gaps, coarse_gaps, mono_gaps, evo_devs = [], [], [], []
for _ in range(400):
    n, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    ch = random_channel(n, m, rng)
    sigma = random_density(n, int(rng.integers(1, n + 1)), rng)
    rho = random_density(n, int(rng.integers(1, n + 1)), rng)
    part = random_partition(m, rng)
    gaps.append(check_fidelity_submartingale(ch, sigma, rho).gap)
    coarse_gaps.append(check_fidelity_submartingale(ch, sigma, rho, part).gap)
    mono_gaps.append(check_kraus_monotonicity(ch, sigma, rho).gap)
    evo_devs.append(check_mean_evolution(ch, rho, part))

print("one-step fidelity gain  E[F'] - F   (400 random instances)")
print(f"  fine-grained : min {min(gaps):.3e}   mean {np.mean(gaps):.3e}")
print(f"  coarse blocks: min {min(coarse_gaps):.3e}   mean {np.mean(coarse_gaps):.3e}")
print(f"deterministic map F(K(s),K(r)) - F(s,r): min {min(mono_gaps):.3e}")
print(f"mean-evolution identity max deviation  : {max(evo_devs):.3e}")

# Hunting for wrong-sign gaps: fidelity and the Frobenius inner product
# never produce one; the trace distance does.
empty = random_search_violation("fidelity", 3, 3, 500, np.random.default_rng(4))
found = random_search_violation(
    "trace_distance", 3, 2, 500, np.random.default_rng(5), include_counterexample=True
)
print(f"\nfidelity violations in 500 trials     : {len(empty)}")
print(f"trace-distance violations in 500 trials: {len(found)}")
if found:
    worst = max(found, key=lambda r: r.gap)
    print(f"  largest: expected next {worst.lhs:.4f} vs current {worst.rhs:.4f}")
