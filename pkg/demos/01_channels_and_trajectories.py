"""Kraus channels and quantum trajectories.

A channel is a list of operators M_mu with sum M_mu† M_mu = I.  Feeding a
density matrix through it deterministically gives K(rho) = sum M_mu rho M_mu†;
reading out which mu occurred instead gives a random jump process whose
average recovers K.
"""

import numpy as np

from qfilter import (
    SimulationConfig,
    apply_channel,
    conditional_update,
    maximally_mixed,
    outcome_probs,
    random_channel,
    random_density,
    simulate,
    validate_channel,
)
from qfilter.filtering import trajectory_to_csv_string

# A hand-built 3-level channel with two outcomes (diagonal Kraus operators).
r = 1 / np.sqrt(2)
channel = validate_channel([np.diag([1.0, r, 0.0]), np.diag([0.0, r, 1.0])])
rho = np.diag([0.5, 0.5, 0.0]).astype(complex)

print("outcome probabilities p_mu(rho):", outcome_probs(channel, rho))
print("K(rho) =\n", apply_channel(channel, rho).real)
for mu in range(2):
    post, _ = conditional_update(channel, mu, rho)
    print(f"state after observing mu={mu}:\n", post.real)

# A randomly sampled channel drives a seeded trajectory.  The estimate
# starts from the maximally mixed state and replays the observed jumps.
rng = np.random.default_rng(1)
cfg = SimulationConfig(
    channel=random_channel(3, 3, rng),
    rho0=random_density(3, 3, rng),
    rho_hat0=maximally_mixed(3),
    steps=8,
    seed=2024,
)
traj = simulate(cfg)
print("\njump record:", traj.outcomes)
print("\ntrajectory CSV (fidelity, distances, purities per step):")
print(trajectory_to_csv_string(traj))
