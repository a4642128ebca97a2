"""Round dynamics: sample who lands at which server, then update the belief."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AssignmentMode,
    BeliefState,
    MetricReport,
    MixConfig,
    RoundAssignment,
    ShapeMismatch,
    honest_mask,
    initial_state,
    marked_mask,
)
from . import metrics


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """PCG64 stream for one trial, keyed by ``(master_seed, trial)``.

    SeedSequence hashes the pair, so distinct trials get non-overlapping streams
    and the result does not depend on the platform.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, trial])))


def sample_partition(config: MixConfig, rng: np.random.Generator) -> RoundAssignment:
    perm = rng.permutation(config.n)
    group_of = np.empty(config.n, dtype=np.intp)
    # the card at permuted position p goes to block p // k
    group_of[perm] = np.arange(config.n) // config.k
    return RoundAssignment(group_of, honest_mask(config), marked_mask(config))


def sample_binomial_assignment(config: MixConfig, rng: np.random.Generator) -> RoundAssignment:
    """Every card picks one of the ``m`` servers independently and uniformly."""
    group_of = rng.integers(0, config.m, size=config.n)
    return RoundAssignment(group_of, honest_mask(config), marked_mask(config))


def sample_assignment(config: MixConfig, rng: np.random.Generator) -> RoundAssignment:
    if config.assignment_mode is AssignmentMode.BINOMIAL:
        return sample_binomial_assignment(config, rng)
    return sample_partition(config, rng)


def apply_round(state: BeliefState, assignment: RoundAssignment) -> BeliefState:
    """Average the unmarked weights inside each honest group.

    Corrupted servers act as the identity and marked cards carry no weight, so
    a group only mixes among its unmarked members.
    """
    w = state.weights
    n = assignment.group_of.size
    unmarked = n - int(np.count_nonzero(assignment.marked))
    if w.size != unmarked:
        raise ShapeMismatch(f"state has {w.size} weights but the assignment has {unmarked} unmarked cards")
    if np.count_nonzero(assignment.marked[:unmarked]):
        raise ShapeMismatch("marked cards must occupy the last f card indices")

    groups = assignment.group_of[:unmarked]
    m = assignment.honest.size
    totals = np.bincount(groups, weights=w, minlength=m)
    counts = np.bincount(groups, minlength=m)
    mixed = assignment.honest[groups]
    new = w.copy()
    new[mixed] = totals[groups[mixed]] / counts[groups[mixed]]
    return BeliefState(new, state.round + 1)


@dataclass(frozen=True)
class Trajectory:
    phi: np.ndarray  # phi[t] for t = 0..rounds
    final: BeliefState
    reports: list[MetricReport] | None = field(default=None, compare=False)

    @property
    def rounds(self) -> int:
        return self.phi.size - 1


def run_trial(
    config: MixConfig,
    rounds: int,
    rng: np.random.Generator,
    with_reports: bool = False,
) -> Trajectory:
    if rounds < 0:
        raise ValueError(f"rounds must be non-negative, got {rounds}")
    state = initial_state(config)
    phis = np.empty(rounds + 1)
    phis[0] = metrics.phi(state)
    reports = [metrics.report(state)] if with_reports else None
    for t in range(1, rounds + 1):
        state = apply_round(state, sample_assignment(config, rng))
        phis[t] = metrics.phi(state)
        if reports is not None:
            reports.append(metrics.report(state))
    phis.setflags(write=False)
    return Trajectory(phis, state, reports)
