"""Domain types shared by the simulator, the metrics and the oracle."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BufShufError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BufShufError, ValueError):
    pass


class DivisibilityError(ConfigError):
    pass


class RangeError(ConfigError):
    pass


class ShapeMismatch(BufShufError, ValueError):
    pass


class AssignmentMode(str, enum.Enum):
    EXACT = "exact"
    BINOMIAL = "binomial"


@dataclass(frozen=True)
class MixConfig:
    n: int
    k: int
    m: int
    s: int
    f: int = 0
    assignment_mode: AssignmentMode = AssignmentMode.EXACT

    @property
    def unmarked(self) -> int:
        return self.n - self.f

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "s": self.s,
            "f": self.f,
            "assignment": self.assignment_mode.value,
        }


def _as_int(name: str, value) -> int:
    if isinstance(value, bool):
        raise RangeError(f"{name} must be an integer, got {value!r}")
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise RangeError(f"{name} must be an integer, got {value!r}") from None
    if out != value and not isinstance(value, str):
        raise RangeError(f"{name} must be an integer, got {value!r}")
    return out


def validate_config(n, k, s=None, f=0, assignment="exact") -> MixConfig:
    """Check raw parameters and derive the server count ``m = n / k``.

    ``s=None`` means every server is honest.
    """
    n = _as_int("n", n)
    k = _as_int("k", k)
    f = _as_int("f", f)
    try:
        mode = AssignmentMode(assignment.value if isinstance(assignment, AssignmentMode)
                              else str(assignment).lower())
    except ValueError:
        raise RangeError(f"assignment must be 'exact' or 'binomial', got {assignment!r}") from None

    if n < 2:
        raise RangeError(f"n must be at least 2, got {n}")
    if k < 2:
        raise RangeError(f"k must be at least 2, got {k}")
    # m = n/k is a server count in both modes, so k must divide n either way
    if n % k:
        raise DivisibilityError(f"k={k} does not divide n={n}")
    if k > n:
        raise RangeError(f"k={k} exceeds n={n}")
    m = n // k
    s = m if s is None else _as_int("s", s)
    if not 0 <= s <= m:
        raise RangeError(f"honest server count s={s} outside [0, {m}]")
    if not 0 <= f <= n - 2:
        raise RangeError(f"marked card count f={f} outside [0, n-2={n - 2}]")
    return MixConfig(n=n, k=k, m=m, s=s, f=f, assignment_mode=mode)


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BeliefState:
    """Adversary belief over the ``n - f`` unmarked positions.

    ``weights[i]`` is the probability that position ``i`` holds the tracked card.
    """

    weights: np.ndarray
    round: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ShapeMismatch("weights must be a non-empty 1-d sequence")
        if w is self.weights:
            w = w.copy()
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def support(self) -> int:
        return self.weights.size

    def is_valid(self, rtol: float = 1e-9) -> bool:
        w = self.weights
        return bool(np.all(w >= 0.0) and np.all(w <= 1.0) and abs(w.sum() - 1.0) <= rtol)


def initial_state(config: MixConfig) -> BeliefState:
    w = np.zeros(config.unmarked)
    w[0] = 1.0
    return BeliefState(w, 0)


@dataclass(frozen=True)
class RoundAssignment:
    group_of: np.ndarray  # card index -> server index, length n
    honest: np.ndarray  # per server
    marked: np.ndarray  # per card

    def __post_init__(self):
        for name in ("group_of", "honest", "marked"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def loads(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.honest.size)

    def groups(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.honest.size)]
        for card, g in enumerate(self.group_of.tolist()):
            out[g].append(card)
        return out


def honest_mask(config: MixConfig) -> np.ndarray:
    """Servers ``0 .. m-s-1`` are corrupted, the remaining ``s`` are honest."""
    return np.arange(config.m) >= config.m - config.s


def marked_mask(config: MixConfig) -> np.ndarray:
    """The last ``f`` card indices are the marked ones."""
    return np.arange(config.n) >= config.n - config.f


@dataclass(frozen=True)
class MetricReport:
    phi: float
    alpha: float
    beta: float
    anon_prime: float
    anon: float
    rel_entropy_bits: float
    k_support: int

    FIELDS = ("phi", "alpha", "beta", "anon_prime", "anon", "rel_entropy_bits", "k_support")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}
