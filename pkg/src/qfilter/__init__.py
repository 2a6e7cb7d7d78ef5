"""Discrete-time quantum Markov chains, quantum filters, and exact sub-martingale checks."""

from .channels import (
    KrausChannel,
    OutcomePartition,
    apply_channel,
    conditional_update,
    make_partition,
    outcome_probs,
    random_channel,
    random_partition,
    singleton_partition,
    trivial_partition,
    validate_channel,
)
from .dilation import Dilation, ProofReplayReport, replay_proof, stinespring, uhlmann_pair
from .filtering import (
    BatchStatistics,
    JointStep,
    JointTrajectory,
    SimulationConfig,
    batch_statistics,
    simulate,
    simulate_batch,
    step_joint,
)
from .linalg import Spectrum, complete_isometry, hermitian_eig, psd_sqrt, trace_abs
from .measures import fidelity, frobenius_inner, purity, relative_entropy, trace_distance
from .states import (
    make_density,
    maximally_mixed,
    partial_trace,
    purify,
    random_density,
    tensor,
)
from .verify import (
    CounterexampleReport,
    GapReport,
    check_fidelity_submartingale,
    check_kraus_monotonicity,
    check_mean_evolution,
    counterexample_instance,
    counterexample_report,
    expected_next_measure,
    measure_gap_report,
    random_search_violation,
)

__version__ = "0.1.0"

__all__ = [
    "BatchStatistics",
    "CounterexampleReport",
    "Dilation",
    "GapReport",
    "JointStep",
    "JointTrajectory",
    "KrausChannel",
    "OutcomePartition",
    "ProofReplayReport",
    "SimulationConfig",
    "Spectrum",
    "apply_channel",
    "batch_statistics",
    "check_fidelity_submartingale",
    "check_kraus_monotonicity",
    "check_mean_evolution",
    "complete_isometry",
    "conditional_update",
    "counterexample_instance",
    "counterexample_report",
    "expected_next_measure",
    "fidelity",
    "frobenius_inner",
    "hermitian_eig",
    "make_density",
    "make_partition",
    "maximally_mixed",
    "measure_gap_report",
    "outcome_probs",
    "partial_trace",
    "psd_sqrt",
    "purify",
    "purity",
    "random_channel",
    "random_density",
    "random_partition",
    "random_search_violation",
    "relative_entropy",
    "replay_proof",
    "simulate",
    "simulate_batch",
    "singleton_partition",
    "step_joint",
    "stinespring",
    "tensor",
    "trace_abs",
    "trace_distance",
    "trivial_partition",
    "uhlmann_pair",
    "validate_channel",
]
