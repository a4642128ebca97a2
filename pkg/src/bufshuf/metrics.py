"""Anonymity measures of a single belief state.

Every measure compares the belief against the uniform distribution over the
``n - f`` unmarked positions.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .core import BeliefState, MetricReport

SUPPORT_THRESHOLD = 1e-15
INEQUALITY_SLACK = 1e-12


def _weights(state) -> np.ndarray:
    if isinstance(state, BeliefState):
        return state.weights
    return np.asarray(state, dtype=float)


def centered(state) -> np.ndarray:
    """Distance of each weight from uniform, ``w_i - 1/(n-f)``."""
    w = _weights(state)
    return w - 1.0 / w.size


def phi(state) -> float:
    """Sum-of-squares potential ``sum(w^2) - 1/(n-f)``.

    Evaluated as ``sum((w - u)^2)``, equal to the above for a normalized
    belief but free of the cancellation that wipes out small potentials.
    """
    x = centered(state)
    return float(np.dot(x, x))


def alpha(state) -> float:
    return float(np.max(np.abs(centered(state))))


def beta(state) -> float:
    return 0.5 * float(np.sum(np.abs(centered(state))))


def anon_prime(state) -> float:
    return float(np.max(_weights(state)))


def anon(state) -> float:
    return 1.0 / anon_prime(state)


def relative_entropy_bits(state) -> float:
    """KL divergence from uniform, in bits, with ``0 log 0 = 0``."""
    w = _weights(state)
    pos = w[w > 0.0]
    value = float(np.sum(pos * np.log2(w.size * pos)))
    # the sum can round to a hair below zero on near-uniform states
    return max(value, 0.0)


def k_support(state) -> int:
    return int(np.count_nonzero(_weights(state) > SUPPORT_THRESHOLD))


def report(state) -> MetricReport:
    ap = anon_prime(state)
    return MetricReport(
        phi=phi(state),
        alpha=alpha(state),
        beta=beta(state),
        anon_prime=ap,
        anon=1.0 / ap,
        rel_entropy_bits=relative_entropy_bits(state),
        k_support=k_support(state),
    )


class Relation(NamedTuple):
    name: str
    lhs: float
    rhs: float
    holds: bool


def check_inequalities(state, slack: float = INEQUALITY_SLACK) -> list[Relation]:
    """Evaluate the six bounds linking phi to alpha, beta and anon'."""
    w = _weights(state)
    size = w.size
    p = phi(w)
    a = alpha(w)
    b = beta(w)
    ap = anon_prime(w)
    root = math.sqrt(p)
    pairs = [
        ("alpha <= sqrt(phi)", a, root),
        ("beta <= sqrt(n*phi)/2", b, math.sqrt(size * p) / 2.0),
        ("anon' <= sqrt(phi) + 1/n", ap, root + 1.0 / size),
        ("sqrt(phi)/2 <= beta", root / 2.0, b),
        ("sqrt(phi/n) <= alpha", math.sqrt(p / size), a),
        ("anon' <= alpha + 1/n", ap, a + 1.0 / size),
    ]
    return [Relation(name, lhs, rhs, lhs <= rhs + slack) for name, lhs, rhs in pairs]
