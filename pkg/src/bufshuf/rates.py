"""Closed-form per-round contraction rates ``E[dPhi/Phi]`` and round counts.

Rates are exact ``Fraction`` values. For the marked-card and binomial settings
two variants ship side by side: the formula as printed in the source analysis
(``*_paper``) and a first-principles re-derivation (``*_derived``). The
enumeration oracle in :mod:`bufshuf.oracle` decides which one is right.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb as _comb
from numbers import Rational

from .core import RangeError


def comb(a: int, b: int) -> int:
    """Binomial coefficient that is 0 outside ``0 <= b <= a``."""
    if a < 0 or b < 0 or b > a:
        return 0
    return _comb(a, b)


class ExponentPolicy(str, enum.Enum):
    AS_PRINTED = "as-printed"  # C(n,J) p^J (1-p)^J
    CORRECTED = "corrected"  # C(n,J) p^J (1-p)^(n-J)


def _check_nk(n: int, k: int) -> None:
    if not 2 <= k <= n:
        raise RangeError(f"need 2 <= k <= n, got n={n}, k={k}")


def _check_f(n: int, f: int) -> None:
    if not 0 <= f <= n - 2:
        raise RangeError(f"need 0 <= f <= n-2, got n={n}, f={f}")


def _check_s(n: int, k: int, s: int) -> None:
    if not 0 <= s <= n // k:
        raise RangeError(f"need 0 <= s <= n/k, got s={s}")


def _check_divides(n: int, k: int) -> None:
    if n % k:
        raise RangeError(f"k={k} must divide n={n}")


def rate_uniform(n: int, k: int) -> Fraction:
    _check_nk(n, k)
    return Fraction(n * (k - 1), k * (n - 1))


def rate_corrupt_servers(n: int, k: int, s: int) -> Fraction:
    _check_nk(n, k)
    _check_s(n, k, s)
    return Fraction(s * (k - 1), n - 1)


def _printed_marked_sum(n: int, k: int, f: int) -> Fraction:
    return sum(
        (Fraction(comb(k, kp) * comb(n - k, n - f - kp) * (kp - 1), kp) for kp in range(2, k + 1)),
        Fraction(0),
    )


def rate_fake_paper(n: int, k: int, f: int) -> Fraction:
    """Marked-card rate exactly as printed (hypergeometric form)."""
    _check_nk(n, k)
    _check_f(n, f)
    return Fraction(n - f, (n - 1) * comb(n, f)) * _printed_marked_sum(n, k, f)


def unmarked_in_group_pmf(n: int, k: int, f: int, kp: int) -> Fraction:
    """Probability that a fixed group of ``k`` holds exactly ``kp`` unmarked cards."""
    return Fraction(comb(n - f, kp) * comb(f, k - kp), comb(n, k))


def rate_fake_derived(n: int, k: int, f: int) -> Fraction:
    """Marked-card rate from conditioning on the unmarked count of each group.

    A group with ``kp`` unmarked cards removes ``(1/kp) * sum over its pairs``
    of squared differences; summing the expected pair weight over the ``n/k``
    groups and dividing by ``Phi`` gives the rate.
    """
    _check_nk(n, k)
    _check_f(n, f)
    _check_divides(n, k)
    if n - f < 2:
        return Fraction(0)
    total = sum(
        (unmarked_in_group_pmf(n, k, f, kp) * (kp - 1) for kp in range(2, k + 1)),
        Fraction(0),
    )
    return Fraction(n, k) * total / (n - f - 1)


def rate_combined_paper(n: int, k: int, s: int, f: int) -> Fraction:
    _check_nk(n, k)
    _check_s(n, k, s)
    _check_f(n, f)
    return Fraction(s * k * (n - f), n * (n - 1) * comb(n, f)) * _printed_marked_sum(n, k, f)


def rate_combined_derived(n: int, k: int, s: int, f: int) -> Fraction:
    _check_s(n, k, s)
    return Fraction(s * k, n) * rate_fake_derived(n, k, f)


def _load_weight(n: int, j: int, p: Fraction, policy: ExponentPolicy) -> Fraction:
    second = j if policy is ExponentPolicy.AS_PRINTED else n - j
    return comb(n, j) * p**j * (1 - p) ** second


def rate_binomial(n: int, k: int, s: int, f: int, policy: ExponentPolicy | str = ExponentPolicy.CORRECTED) -> Fraction:
    """Rate under independent card-to-server assignment, evaluated exactly.

    Sums over the server load ``J`` with the printed per-load term; ``policy``
    selects the second exponent of the load weight (``J`` as printed or ``n-J``).
    """
    policy = ExponentPolicy(policy)
    _check_nk(n, k)
    _check_s(n, k, s)
    _check_f(n, f)
    p = Fraction(k, n)
    scale = n - f  # E[dPhi] = coeff * sum_{i<j}(w_i-w_j)^2 = coeff * (n-f) * Phi
    total = Fraction(0)
    for j in range(2, n + 1):
        weight = _load_weight(n, j, p, policy)
        if not weight:
            continue
        inner = sum(
            (Fraction(comb(j, kp) * comb(n - j, n - f - kp) * (kp - 1), kp) for kp in range(2, j + 1)),
            Fraction(0),
        )
        total += weight * Fraction(s * j, n * (n - 1) * comb(n, f)) * inner
    return scale * total


def rate_binomial_derived(n: int, k: int, s: int, f: int) -> Fraction:
    """Rate under independent assignment from the unmarked count at one server.

    An honest server sees ``Binomial(n-f, k/n)`` unmarked cards; a load of
    ``u`` removes ``(u-1)/2`` expected pair weight, so the rate is
    ``s * E[max(u-1, 0)] / (n-f-1)``.
    """
    _check_nk(n, k)
    _check_s(n, k, s)
    _check_f(n, f)
    u_max = n - f
    if u_max < 2:
        return Fraction(0)
    p = Fraction(k, n)
    expected = sum(
        (comb(u_max, u) * p**u * (1 - p) ** (u_max - u) * (u - 1) for u in range(2, u_max + 1)),
        Fraction(0),
    )
    return s * expected / (u_max - 1)


def predicted_phi(rate, t: int, phi0=1):
    """``(1 - rate)^t * phi0``; exact when both inputs are rational."""
    if t < 0:
        raise RangeError(f"t must be non-negative, got {t}")
    if isinstance(rate, Rational) and isinstance(phi0, Rational):
        return (1 - Fraction(rate)) ** t * Fraction(phi0)
    return (1.0 - float(rate)) ** t * float(phi0)


@dataclass(frozen=True)
class RatePrediction:
    rate: Fraction
    phi0: Fraction = Fraction(1)

    def __post_init__(self):
        if not 0 <= self.rate <= 1:
            raise RangeError(f"rate {self.rate} outside [0, 1]")

    def predicted_phi(self, t: int) -> float:
        return float(predicted_phi(self.rate, t, self.phi0))

    def curve(self, rounds: int) -> list[float]:
        return [self.predicted_phi(t) for t in range(rounds + 1)]


EXACT_ROUND_LIMIT = 10_000


def _is_integral(x) -> bool:
    return isinstance(x, int) or (isinstance(x, Rational) and x.denominator == 1) or (
        isinstance(x, float) and x.is_integer()
    )


def rounds_for_target(rate, n: int, b=1) -> int:
    """Fewest rounds ``t`` with ``(1 - rate)^t <= n^(-b)``.

    That is ``ceil(b * log_{1/(1-rate)} n)``; with integral ``b`` the boundary is
    settled in exact arithmetic so e.g. rate 1/2 at n=256 gives 8, not 9.
    """
    if b < 1:
        raise RangeError(f"b must be at least 1, got {b}")
    if n < 2:
        raise RangeError(f"n must be at least 2, got {n}")
    r = Fraction(rate) if isinstance(rate, (Rational, float)) else Fraction(str(rate))
    if not 0 < r <= 1:
        raise RangeError(f"rate must lie in (0, 1], got {rate}")
    if r == 1:
        return 1
    q = 1 - r
    t = max(1, math.ceil(float(b) * math.log(n) / -math.log(float(q))))
    if not _is_integral(b) or t > EXACT_ROUND_LIMIT:
        return t
    target = Fraction(1, n ** int(b))
    while t > 1 and q ** (t - 1) <= target:
        t -= 1
    while q**t > target:
        t += 1
    return t


def markov_rounds(rate, n: int, b=1) -> int:
    """Rounds after which ``Pr(Phi > n^-b) <= n^-b``, i.e. double the expectation target."""
    return 2 * rounds_for_target(rate, n, b)


def corrupted_server_allowance(n: int, k: int, c) -> float:
    """Largest corrupted-server count keeping the rate at least ``1 - n^(-1/c)``."""
    return n ** (-1.0 / c) * (n - 1) / (k - 1) - (n - k) / (k * (k - 1))
