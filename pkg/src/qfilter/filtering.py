"""The coupled Markov chain: true state + filter estimate driven by shared jumps.

Each step samples a jump index from the TRUE state's outcome distribution and
applies the same conditional update to both the true state rho_k and the
estimate rho_hat_k; the estimate falls back to xi when its own block
probability vanishes.  Channels may be fixed, per-step, or chosen by a
feedback rule that sees only (k, rho_hat_k).

Randomness: one uniform draw per step, inverse-CDF over the exact outcome
probabilities (residual mass goes to the last block).  Trajectory i of a
batch uses the child generator SeedSequence(seed, spawn_key=(i,)), so batches
are reproducible and order-independent.

:func:`batch_statistics` is the fast path: it advances all trajectories in
lockstep on stacked arrays while drawing from the same per-trajectory child
generators, and records fidelity curves plus the batch-mean true state.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import measures
from .channels import (
    ZERO_PROB_TOL,
    KrausChannel,
    OutcomePartition,
    conditional_update,
    outcome_probs,
    singleton_partition,
)
from .linalg import ZERO_EIGENVALUE_TRIM
from .states import make_density, maximally_mixed

ChannelSource = Union[KrausChannel, Sequence[KrausChannel], Callable[[int, np.ndarray], KrausChannel]]

TRAJECTORY_COLUMNS = (
    "k",
    "outcome",
    "fidelity",
    "trace_distance",
    "frobenius",
    "purity_true",
    "purity_estimate",
    "fallback_used",
)


class SimulationError(RuntimeError):
    """A step failed; the partial trajectory is attached as .trajectory."""

    def __init__(self, message: str, trajectory: "JointTrajectory"):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class JointStep:
    """One record of the coupled chain.

    `outcome` is the jump index that produced this pair of states (None for
    the initial record); `fallback_used` marks an estimate update that had to
    fall back to xi.
    """

    k: int
    outcome: int | None
    true_state: np.ndarray
    estimate: np.ndarray
    fallback_used: bool = False


@dataclass
class JointTrajectory:
    steps: list[JointStep]
    config_fingerprint: str
    seed: int | None
    traj_index: int = 0

    @property
    def outcomes(self) -> list[int]:
        return [s.outcome for s in self.steps if s.outcome is not None]

    def fidelities(self) -> np.ndarray:
        return np.array([measures.fidelity(s.estimate, s.true_state) for s in self.steps])


@dataclass
class SimulationConfig:
    """Inputs of a trajectory run; `channel` is fixed, per-step, or feedback.

    A feedback selector is a callable (k, rho_hat_k) -> KrausChannel; it is
    never shown the true state.
    """

    channel: ChannelSource
    rho0: np.ndarray
    rho_hat0: np.ndarray
    steps: int
    partition: OutcomePartition | None = None
    fallback: np.ndarray | None = None
    seed: int | None = None

    def validate(self) -> None:
        rho0 = make_density(self.rho0)
        rho_hat0 = make_density(self.rho_hat0)
        if rho0.shape != rho_hat0.shape:
            raise ValueError(
                f"rho0 and rho_hat0 dims differ: {rho0.shape} vs {rho_hat0.shape}"
            )
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.seed is None:
            raise ValueError("a seed is required for reproducible simulation")
        if self.fallback is not None:
            make_density(self.fallback)
        if not isinstance(self.channel, KrausChannel) and not callable(self.channel):
            if len(self.channel) < self.steps:
                raise ValueError(
                    f"per-step channel list has {len(self.channel)} entries for {self.steps} steps"
                )

    def channel_at(self, k: int, rho_hat: np.ndarray) -> KrausChannel:
        if isinstance(self.channel, KrausChannel):
            return self.channel
        if callable(self.channel):
            return self.channel(k, rho_hat)
        return self.channel[k]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for part in self._fingerprint_parts():
            h.update(part)
        return h.hexdigest()[:16]

    def _fingerprint_parts(self):
        if isinstance(self.channel, KrausChannel):
            yield np.ascontiguousarray(self.channel.operators).tobytes()
        elif callable(self.channel):
            yield getattr(self.channel, "__qualname__", repr(self.channel)).encode()
        else:
            for ch in self.channel:
                yield np.ascontiguousarray(ch.operators).tobytes()
        yield np.ascontiguousarray(np.asarray(self.rho0, dtype=complex)).tobytes()
        yield np.ascontiguousarray(np.asarray(self.rho_hat0, dtype=complex)).tobytes()
        yield str(self.steps).encode()
        if self.partition is not None:
            yield repr(self.partition.blocks).encode()
        if self.fallback is not None:
            yield np.ascontiguousarray(np.asarray(self.fallback, dtype=complex)).tobytes()
        yield str(self.seed).encode()


def step_joint(
    ch: KrausChannel,
    rho: np.ndarray,
    rho_hat: np.ndarray,
    *,
    rng: np.random.Generator,
    partition: OutcomePartition | None = None,
    fallback: np.ndarray | None = None,
    k: int = 0,
) -> JointStep:
    """One transition: sample a jump from rho's distribution, update both states.

    The true state drives the randomness; the estimate replays the same index
    and falls back to xi when its own block probability vanishes.
    """
    probs = outcome_probs(ch, rho, partition)
    idx = _sample_outcome(probs, rng.random())
    new_rho, _ = conditional_update(ch, idx, rho, partition, fallback)
    new_hat, used_fallback = conditional_update(ch, idx, rho_hat, partition, fallback)
    return JointStep(k, idx, new_rho, new_hat, used_fallback)


def simulate(cfg: SimulationConfig, traj_index: int = 0) -> JointTrajectory:
    """Run one trajectory of cfg.steps transitions, deterministic given the seed.

    The generator is the child SeedSequence(cfg.seed, spawn_key=(traj_index,)),
    so simulate(cfg, i) is exactly trajectory i of a batch.
    """
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(traj_index,)))
    rho = make_density(cfg.rho0)
    rho_hat = make_density(cfg.rho_hat0)
    records = [JointStep(0, None, rho, rho_hat, False)]
    for k in range(cfg.steps):
        try:
            ch = cfg.channel_at(k, rho_hat)
            step = step_joint(
                ch, rho, rho_hat,
                rng=rng, partition=cfg.partition, fallback=cfg.fallback, k=k + 1,
            )
        except ValueError as exc:
            partial = JointTrajectory(records, cfg.fingerprint(), cfg.seed, traj_index)
            raise SimulationError(f"step {k} failed: {exc}", partial) from exc
        records.append(step)
        rho, rho_hat = step.true_state, step.estimate
    return JointTrajectory(records, cfg.fingerprint(), cfg.seed, traj_index)


def simulate_batch(cfg: SimulationConfig, n_traj: int) -> list[JointTrajectory]:
    """n_traj independent trajectories; trajectory i uses child seed i.

    Results do not depend on execution order, so this is trivially
    parallelizable; trajectories are produced sequentially here.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    return [simulate(cfg, traj_index=i) for i in range(n_traj)]


@dataclass
class BatchStatistics:
    """Per-step summaries of a lockstep batch run."""

    fidelity: np.ndarray  # (n_traj, steps + 1)
    outcomes: np.ndarray  # (n_traj, steps)
    mean_true_state: np.ndarray  # (steps + 1, n, n)
    fallback_counts: np.ndarray  # (steps,)

    @property
    def mean_fidelity(self) -> np.ndarray:
        return self.fidelity.mean(axis=0)

    def step_gain_z_scores(self) -> np.ndarray:
        """z-score of each per-step mean fidelity gain against its paired stderr.

        Entry k scores mean(F_{k+1} - F_k); positive means the batch mean
        increased.  Steps whose gain is identically zero across the batch
        score +inf (an exact martingale step never counts as a decrease).
        """
        diff = np.diff(self.fidelity, axis=1)
        mean = diff.mean(axis=0)
        stderr = diff.std(axis=0, ddof=1) / np.sqrt(diff.shape[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(stderr > 0, mean / stderr, np.where(mean >= 0, np.inf, -np.inf))
        return z


def batch_statistics(cfg: SimulationConfig, n_traj: int) -> BatchStatistics:
    """Advance n_traj trajectories in lockstep on stacked arrays.

    Equivalent to simulate_batch (same child generators, one uniform per
    step per trajectory) but vectorized across the batch.  Feedback channel
    selectors are not supported here, since each trajectory would need its
    own channel; use simulate_batch for those.
    """
    cfg.validate()
    if not isinstance(cfg.channel, KrausChannel) and callable(cfg.channel):
        raise ValueError("feedback channel selectors are not supported by batch_statistics")
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")

    rho0 = make_density(cfg.rho0)
    hat0 = make_density(cfg.rho_hat0)
    n = rho0.shape[0]
    steps = cfg.steps
    rngs = [
        np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        for i in range(n_traj)
    ]

    rho = np.repeat(rho0[None, ...], n_traj, axis=0)
    hat = np.repeat(hat0[None, ...], n_traj, axis=0)
    fid = np.empty((n_traj, steps + 1))
    fid[:, 0] = _fidelity_batch(hat, rho)
    outcomes = np.empty((n_traj, steps), dtype=np.int64)
    mean_true = np.empty((steps + 1, n, n), dtype=complex)
    mean_true[0] = rho0
    fallback_counts = np.zeros(steps, dtype=np.int64)
    rows = np.arange(n_traj)

    for k in range(steps):
        ch = cfg.channel_at(k, hat0)
        if ch.dim != n:
            raise ValueError(f"channel at step {k} has dim {ch.dim}, states have dim {n}")
        partition = cfg.partition if cfg.partition is not None else singleton_partition(ch.num_outcomes)
        if partition.m != ch.num_outcomes:
            raise ValueError(
                f"partition is over {partition.m} outcomes, channel at step {k} has {ch.num_outcomes}"
            )
        blocks = partition.blocks

        probs = _block_probs_batch(ch, blocks, rho)
        u = np.fromiter((r.random() for r in rngs), dtype=float, count=n_traj)
        cum = np.cumsum(probs, axis=1)
        idx = np.minimum((u[:, None] >= cum).sum(axis=1), len(blocks) - 1)
        degenerate = probs[rows, idx] <= ZERO_PROB_TOL
        if degenerate.any():
            idx[degenerate] = probs[degenerate].argmax(axis=1)
        outcomes[:, k] = idx

        rho = _update_batch(ch, blocks, rho, idx)
        hat_probs = _block_probs_batch(ch, blocks, hat)
        needs_fallback = hat_probs[rows, idx] <= ZERO_PROB_TOL
        if needs_fallback.any():
            xi = maximally_mixed(n) if cfg.fallback is None else np.asarray(cfg.fallback, dtype=complex)
            hat = hat.copy()
            hat[needs_fallback] = xi
            fallback_counts[k] = int(needs_fallback.sum())
        hat = _update_batch(ch, blocks, hat, idx)

        fid[:, k + 1] = _fidelity_batch(hat, rho)
        mean_true[k + 1] = rho.mean(axis=0)

    return BatchStatistics(fid, outcomes, mean_true, fallback_counts)


def write_trajectory_csv(traj: JointTrajectory, file) -> None:
    """One CSV row per step: the columns in TRAJECTORY_COLUMNS.

    The initial record is written with outcome -1.  Floats carry 17
    significant digits so round-trips are lossless.
    """
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "w", newline="") if own else file
    try:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for s in traj.steps:
            fh.write(
                "{},{},{},{},{},{},{},{}\n".format(
                    s.k,
                    -1 if s.outcome is None else s.outcome,
                    _fmt(measures.fidelity(s.estimate, s.true_state)),
                    _fmt(measures.trace_distance(s.estimate, s.true_state)),
                    _fmt(measures.frobenius_inner(s.estimate, s.true_state)),
                    _fmt(measures.purity(s.true_state)),
                    _fmt(measures.purity(s.estimate)),
                    int(s.fallback_used),
                )
            )
    finally:
        if own:
            fh.close()


def trajectory_to_csv_string(traj: JointTrajectory) -> str:
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    return buf.getvalue()


def trajectory_to_dict(traj: JointTrajectory, include_states: bool = False) -> dict:
    """JSON-compatible dump; include_states adds full matrix encodings."""
    from .states import matrix_to_dict

    steps = []
    for s in traj.steps:
        rec = {
            "k": s.k,
            "outcome": -1 if s.outcome is None else s.outcome,
            "fallback_used": bool(s.fallback_used),
            "fidelity": measures.fidelity(s.estimate, s.true_state),
        }
        if include_states:
            rec["true_state"] = matrix_to_dict(s.true_state)
            rec["estimate"] = matrix_to_dict(s.estimate)
        steps.append(rec)
    return {
        "config_fingerprint": traj.config_fingerprint,
        "seed": traj.seed,
        "traj_index": traj.traj_index,
        "steps": steps,
    }


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _sample_outcome(probs: np.ndarray, u: float) -> int:
    """Inverse CDF over the exact probability vector; residual mass to the last block."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= len(probs):
        idx = len(probs) - 1
    if probs[idx] <= ZERO_PROB_TOL:
        idx = int(np.argmax(probs))
    return idx


def _block_probs_batch(ch: KrausChannel, blocks, stack: np.ndarray) -> np.ndarray:
    per = np.einsum("mij,bjk,mik->bm", ch.operators, stack, ch.operators.conj()).real
    return np.stack([per[:, list(b)].sum(axis=1) for b in blocks], axis=1)


def _update_batch(ch: KrausChannel, blocks, stack: np.ndarray, idx: np.ndarray) -> np.ndarray:
    out = np.empty_like(stack)
    for v in np.unique(idx):
        sel = idx == v
        ops = ch.operators[list(blocks[v])]
        upd = np.einsum("mij,bjk,mlk->bil", ops, stack[sel], ops.conj())
        upd = (upd + upd.conj().swapaxes(-1, -2)) / 2
        traces = np.einsum("bii->b", upd).real
        if (traces <= ZERO_PROB_TOL).any():
            raise ValueError(
                f"block {int(v)} has zero probability for the state and for the fallback"
            )
        out[sel] = upd / traces[:, None, None]
    return out


def _psd_sqrt_batch(stack: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(stack)
    w = np.where(w <= ZERO_EIGENVALUE_TRIM, 0.0, w)
    return (U * np.sqrt(w)[:, None, :]) @ U.conj().swapaxes(-1, -2)


def _fidelity_batch(sig: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Fidelity for stacked pairs, same singular-value route as measures.fidelity."""
    cross = _psd_sqrt_batch(sig) @ _psd_sqrt_batch(rho)
    f = np.linalg.svd(cross, compute_uv=False).sum(axis=-1) ** 2
    return np.clip(f, 0.0, 1.0)
