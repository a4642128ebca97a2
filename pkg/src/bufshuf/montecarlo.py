"""Seeded multi-trial experiments and their comparison with predicted curves."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import MixConfig
from .engine import run_trial, trial_rng
from .rates import RatePrediction

# below this gap an empirical/predicted pair counts as equal even with zero stderr
MATCH_ATOL = 1e-12


@dataclass(frozen=True)
class RoundStats:
    round: int
    mean_phi: float
    sample_std: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class ExperimentResult:
    config: MixConfig
    master_seed: int
    rows: tuple[RoundStats, ...]
    phi: np.ndarray = field(repr=False, compare=False)  # trials x (rounds + 1)

    @property
    def rounds(self) -> int:
        return len(self.rows) - 1

    @property
    def trials(self) -> int:
        return self.phi.shape[0]

    def mean_phi(self) -> np.ndarray:
        return np.array([r.mean_phi for r in self.rows])

    def stderr(self) -> np.ndarray:
        return np.array([r.stderr for r in self.rows])


def _trial_block(args) -> np.ndarray:
    config, rounds, master_seed, start, stop = args
    out = np.empty((stop - start, rounds + 1))
    for row, i in enumerate(range(start, stop)):
        out[row] = run_trial(config, rounds, trial_rng(master_seed, i)).phi
    return out


def default_workers() -> int:
    return int(os.environ.get("BUFSHUF_WORKERS", "1"))


def run_experiment(
    config: MixConfig,
    rounds: int,
    trials: int,
    master_seed: int,
    workers: int | None = None,
) -> ExperimentResult:
    """Run ``trials`` seeded trajectories and summarise Phi per round.

    Trial ``i`` always uses the stream keyed by ``(master_seed, i)`` and lands
    in row ``i``, so the worker count never changes the result.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, trials))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    jobs = [(config, rounds, master_seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if workers == 1:
        blocks = [_trial_block(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_trial_block, jobs))
    phi = np.concatenate(blocks)
    phi.setflags(write=False)
    return ExperimentResult(config, master_seed, summarize(phi), phi)


def _column_stats(col: np.ndarray) -> tuple[float, float]:
    # shift by the column minimum and sum with fsum: exact for constant columns
    # and independent of trial order
    shift = float(col.min())
    dev = col - shift
    mean = shift + math.fsum(dev) / col.size
    resid = col - mean
    std = math.sqrt(math.fsum(resid * resid) / (col.size - 1))
    return mean, std


def summarize(phi: np.ndarray) -> tuple[RoundStats, ...]:
    trials = phi.shape[0]
    rows = []
    for t in range(phi.shape[1]):
        mean, std = _column_stats(phi[:, t])
        rows.append(RoundStats(t, mean, std, std / math.sqrt(trials), trials))
    return tuple(rows)


@dataclass(frozen=True)
class ComparisonRow:
    round: int
    empirical: float
    predicted: float
    stderr: float
    z_score: float
    within_3_sigma: bool
    checked: bool  # False when the prediction sits below the noise floor


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.within_3_sigma for r in self.rows if r.checked)


def z_score(empirical: float, predicted: float, stderr: float) -> float:
    diff = empirical - predicted
    if abs(diff) <= MATCH_ATOL * max(1.0, abs(predicted)):
        return 0.0
    if stderr == 0.0:
        return math.copysign(math.inf, diff)
    return diff / stderr


def compare_to_theory(result: ExperimentResult, prediction: RatePrediction, sigmas: float = 3.0) -> Comparison:
    rows = []
    for stats in result.rows:
        predicted = prediction.predicted_phi(stats.round)
        z = z_score(stats.mean_phi, predicted, stats.stderr)
        rows.append(
            ComparisonRow(
                round=stats.round,
                empirical=stats.mean_phi,
                predicted=predicted,
                stderr=stats.stderr,
                z_score=z,
                within_3_sigma=abs(z) <= sigmas,
                checked=predicted >= 10.0 * stats.stderr,
            )
        )
    return Comparison(tuple(rows))


def ratio_of_means(phi: np.ndarray, t: int) -> tuple[float, float]:
    """Estimate ``E[Phi(t+1)] / E[Phi(t)]`` with a delta-method standard error."""
    x = phi[:, t]
    y = phi[:, t + 1]
    mx = x.mean()
    ratio = y.mean() / mx
    resid = y - ratio * x
    err = resid.std(ddof=1) / (math.sqrt(x.size) * mx)
    return float(ratio), float(err)
