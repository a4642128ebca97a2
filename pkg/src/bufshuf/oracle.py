"""Exact ground truth by enumerating every outcome of one round.

Everything here is rational arithmetic; there is no floating point in this
module.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Iterator, Sequence

from .core import AssignmentMode, BufShufError, MixConfig, RangeError

MAX_PARTITION_N = 12
DEFAULT_CAP = 10**6
MAX_BINOMIAL_N = 8
MAX_BINOMIAL_M = 3


class TooLarge(BufShufError):
    pass


class NotConstant(BufShufError):
    pass


Partition = tuple[tuple[int, ...], ...]


def partition_count(n: int, k: int) -> int:
    m = n // k
    return factorial(n) // (factorial(k) ** m * factorial(m))


def enumerate_partitions(n: int, k: int, cap: int = DEFAULT_CAP) -> Iterator[Partition]:
    """Yield each unordered split of ``0..n-1`` into blocks of ``k`` exactly once.

    Blocks are sorted tuples and appear in order of their smallest element.
    """
    if k < 1 or n % k:
        raise RangeError(f"k={k} must divide n={n}")
    if n > MAX_PARTITION_N or partition_count(n, k) > cap:
        raise TooLarge(f"{partition_count(n, k)} partitions of n={n} into blocks of {k} (cap {cap}, n <= {MAX_PARTITION_N})")
    return _partitions(tuple(range(n)), k)


def _partitions(items: tuple[int, ...], k: int) -> Iterator[Partition]:
    if not items:
        yield ()
        return
    head, rest = items[0], items[1:]
    for companions in itertools.combinations(rest, k - 1):
        block = (head,) + companions
        remaining = tuple(x for x in rest if x not in companions)
        for tail in _partitions(remaining, k):
            yield (block,) + tail


def _as_fractions(state) -> list[Fraction]:
    weights = getattr(state, "weights", state)
    out = [Fraction(w) for w in weights]
    if sum(out) != 1 or any(w < 0 for w in out):
        raise RangeError("probe state must be a probability vector")
    return out


def exact_phi(weights: Sequence[Fraction]) -> Fraction:
    return sum((w * w for w in weights), Fraction(0)) - Fraction(1, len(weights))


def group_delta(weights: Sequence[Fraction], members: Sequence[int]) -> Fraction:
    """Drop in sum of squares when ``members`` are replaced by their mean."""
    if len(members) < 2:
        return Fraction(0)
    total = sum((weights[i] for i in members), Fraction(0))
    squares = sum((weights[i] * weights[i] for i in members), Fraction(0))
    return squares - total * total / len(members)


def exact_expected_delta_phi(state, config: MixConfig, cap: int = DEFAULT_CAP) -> Fraction:
    """E[dPhi] over every partition and every choice of ``s`` honest groups."""
    w = _as_fractions(state)
    if len(w) != config.unmarked:
        raise RangeError(f"state has {len(w)} weights, expected {config.unmarked}")
    if config.assignment_mode is AssignmentMode.BINOMIAL:
        return exact_expected_delta_phi_binomial(w, config)
    unmarked = config.unmarked
    honest_sets = list(itertools.combinations(range(config.m), config.s))
    total = Fraction(0)
    outcomes = 0
    for partition in enumerate_partitions(config.n, config.k, cap):
        deltas = [group_delta(w, [c for c in block if c < unmarked]) for block in partition]
        for honest in honest_sets:
            total += sum((deltas[g] for g in honest), Fraction(0))
        outcomes += len(honest_sets)
    return total / outcomes


def exact_expected_delta_phi_binomial(state, config: MixConfig) -> Fraction:
    """E[dPhi] over all ``m^n`` independent card-to-server assignments.

    Servers ``m-s .. m-1`` are the honest ones, as in the simulator.
    """
    w = _as_fractions(state)
    n, m = config.n, config.m
    if n > MAX_BINOMIAL_N or m > MAX_BINOMIAL_M:
        raise TooLarge(f"binomial enumeration limited to n <= {MAX_BINOMIAL_N}, m <= {MAX_BINOMIAL_M}")
    unmarked = config.unmarked
    honest = range(m - config.s, m)
    total = Fraction(0)
    # marked cards never move weight, so only the unmarked cards' servers matter
    for servers in itertools.product(range(m), repeat=unmarked):
        for g in honest:
            total += group_delta(w, [c for c in range(unmarked) if servers[c] == g])
    return total / m**unmarked


def default_probes(config: MixConfig, count: int = 3, seed: int = 0) -> list[list[Fraction]]:
    """A point mass plus random rational beliefs, none of them uniform."""
    size = config.unmarked
    rng = random.Random(seed)
    probes = [[Fraction(int(i == 0)) for i in range(size)]]
    while len(probes) < count:
        raw = [rng.randint(0, 12) for _ in range(size)]
        if len(set(raw)) < 2:
            continue
        total = sum(raw)
        probes.append([Fraction(x, total) for x in raw])
    return probes


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Row rank by exact Gaussian elimination."""
    matrix = [list(map(Fraction, r)) for r in rows]
    rank_ = 0
    cols = len(matrix[0]) if matrix else 0
    for col in range(cols):
        pivot = next((r for r in range(rank_, len(matrix)) if matrix[r][col] != 0), None)
        if pivot is None:
            continue
        matrix[rank_], matrix[pivot] = matrix[pivot], matrix[rank_]
        for r in range(len(matrix)):
            if r != rank_ and matrix[r][col] != 0:
                factor = matrix[r][col] / matrix[rank_][col]
                matrix[r] = [a - factor * b for a, b in zip(matrix[r], matrix[rank_])]
        rank_ += 1
    return rank_


@dataclass(frozen=True)
class RateCheck:
    rate: Fraction
    per_probe: tuple[Fraction, ...]
    probe_rank: int

    @property
    def constant(self) -> bool:
        return len(set(self.per_probe)) == 1


def exact_rate(config: MixConfig, probe_states=None, cap: int = DEFAULT_CAP) -> RateCheck:
    """E[dPhi]/Phi on several probes; they must all agree exactly.

    Raises NotConstant otherwise, which would mean the round model is broken.
    """
    probes = default_probes(config) if probe_states is None else [_as_fractions(p) for p in probe_states]
    needed = min(3, config.unmarked)
    r = rank(probes)
    if r < needed:
        raise RangeError(f"need {needed} linearly independent probes, got rank {r}")
    values = []
    for p in probes:
        phi = exact_phi(p)
        if phi == 0:
            raise RangeError("uniform probe has zero potential")
        values.append(exact_expected_delta_phi(p, config, cap) / phi)
    if len(set(values)) != 1:
        raise NotConstant(f"rate differs across probes: {sorted(set(values))}")
    return RateCheck(values[0], tuple(values), r)


def honest_subset_count(config: MixConfig) -> int:
    return comb(config.m, config.s)
