import math
from fractions import Fraction as F

import pytest

from bufshuf import rates as R
from bufshuf.core import RangeError
from bufshuf.oracle import exact_rate
from bufshuf.core import validate_config


def grid(n_max=64):
    for n in range(4, n_max + 1):
        for k in range(2, n + 1):
            if n % k == 0:
                yield n, k


def test_uniform_examples():
    assert R.rate_uniform(9, 9) == 1
    assert R.rate_uniform(4, 2) == F(2, 3)
    assert R.rate_uniform(16, 4) == F(4, 5)
    with pytest.raises(RangeError):
        R.rate_uniform(4, 1)
    with pytest.raises(RangeError):
        R.rate_uniform(4, 5)


def test_uniform_gap_below_one_over_k():
    for n in range(2, 80):
        for k in range(2, n + 1):
            assert 1 - R.rate_uniform(n, k) < F(1, k)


def test_uniform_non_decreasing_in_k():
    for n in range(4, 65):
        vals = [R.rate_uniform(n, k) for k in range(2, n + 1)]
        assert vals == sorted(vals)


def test_corrupt_server_examples():
    assert R.rate_corrupt_servers(16, 4, 4) == R.rate_uniform(16, 4)
    assert R.rate_corrupt_servers(16, 4, 0) == 0
    rate = R.rate_corrupt_servers(16, 4, 3)
    assert rate == F(3, 5)
    z, root_n = 1, 4
    assert 1 - rate == F(z + 1, root_n + 1)


def test_fake_paper_examples():
    assert R.rate_fake_paper(8, 4, 0) == R.rate_uniform(8, 4)
    assert R.rate_fake_paper(4, 2, 1) == F(1, 4)
    # printed formula by hand: 5/(5*6) * [C(3,2)C(3,2)/2 + 2*C(3,3)C(3,2)/3] = 7/12
    assert R.rate_fake_paper(6, 3, 1) == F(7, 12)
    with pytest.raises(RangeError):
        R.rate_fake_paper(4, 2, 3)


def test_fake_derived_examples():
    assert R.rate_fake_derived(8, 4, 0) == R.rate_uniform(8, 4)
    assert R.rate_fake_derived(4, 2, 1) == F(1, 2)
    assert R.rate_fake_derived(6, 3, 1) == F(3, 4)


def test_combined_examples():
    assert R.rate_combined_paper(8, 2, 4, 0) == R.rate_uniform(8, 2)
    assert R.rate_combined_paper(8, 2, 3, 0) == R.rate_corrupt_servers(8, 2, 3)
    assert R.rate_combined_paper(4, 2, 1, 1) == F(1, 8)
    assert R.rate_combined_paper(4, 2, 1, 1) == F(1, 2) * R.rate_fake_paper(4, 2, 1)
    assert R.rate_combined_derived(4, 2, 1, 1) == F(1, 4)
    assert R.rate_combined_derived(4, 2, 2, 1) == R.rate_fake_derived(4, 2, 1)
    assert R.rate_combined_derived(8, 2, 3, 0) == R.rate_corrupt_servers(8, 2, 3)


def test_reduction_lattice():
    for n, k in grid(40):
        m = n // k
        assert R.rate_fake_paper(n, k, 0) == R.rate_uniform(n, k)
        assert R.rate_fake_derived(n, k, 0) == R.rate_uniform(n, k)
        for s in range(m + 1):
            assert R.rate_combined_paper(n, k, s, 0) == R.rate_corrupt_servers(n, k, s)
            assert R.rate_combined_derived(n, k, s, 0) == R.rate_corrupt_servers(n, k, s)
        for f in range(n - 1):
            assert R.rate_combined_paper(n, k, m, f) == R.rate_fake_paper(n, k, f)
            assert R.rate_combined_derived(n, k, m, f) == R.rate_fake_derived(n, k, f)


def test_monotone_in_f_and_s_and_bounded_by_uniform():
    for n, k in grid(64):
        m = n // k
        top = R.rate_uniform(n, k)
        for fn in (R.rate_fake_paper, R.rate_fake_derived):
            vals = [fn(n, k, f) for f in range(n - 1)]
            assert all(b <= a for a, b in zip(vals, vals[1:])), (fn.__name__, n, k)
            assert all(0 <= v <= top for v in vals)
        for f in (0, 1, n // 2, n - 2):
            for fn in (R.rate_combined_paper, R.rate_combined_derived):
                vals = [fn(n, k, s, f) for s in range(m + 1)]
                assert vals == sorted(vals)


def test_binomial_policies_differ():
    printed = R.rate_binomial(4, 2, 2, 0, R.ExponentPolicy.AS_PRINTED)
    corrected = R.rate_binomial(4, 2, 2, 0, R.ExponentPolicy.CORRECTED)
    # hand evaluation over loads J=2..4 with p=1/2: corrected 17/24, as printed 131/384
    assert corrected == F(17, 24)
    assert printed == F(131, 384)


def test_binomial_load_weights():
    n, p = 10, F(3, 10)
    corrected = sum(R._load_weight(n, j, p, R.ExponentPolicy.CORRECTED) for j in range(n + 1))
    printed = sum(R._load_weight(n, j, p, R.ExponentPolicy.AS_PRINTED) for j in range(n + 1))
    assert corrected == 1
    assert printed == (1 + p * (1 - p)) ** n != 1


def test_binomial_single_server():
    assert R.rate_binomial(8, 8, 1, 0, "corrected") == 1
    assert R.rate_binomial(8, 8, 1, 0, "as-printed") <= 1


def test_binomial_corrected_equals_derived_without_marks():
    for n, k in [(4, 2), (8, 2), (12, 4), (64, 8)]:
        for s in (1, n // k):
            assert R.rate_binomial(n, k, s, 0) == R.rate_binomial_derived(n, k, s, 0)


def test_binomial_derived_closed_form_without_marks():
    # E[max(J-1, 0)] = E[J] - 1 + P(J = 0) for a Binomial(n, 1/m) load J
    for n, k in [(16, 4), (64, 8), (36, 6)]:
        m = n // k
        for s in (1, m):
            expected = s * (k - 1 + F(m - 1, m) ** n) / (n - 1)
            assert R.rate_binomial_derived(n, k, s, 0) == expected
            assert R.rate_binomial_derived(n, k, s, 0) > R.rate_corrupt_servers(n, k, s)


def test_predicted_phi():
    assert R.predicted_phi(F(1, 2), 0, F(3, 4)) == F(3, 4)
    assert R.predicted_phi(1, 3) == 0
    assert R.predicted_phi(0.5, 2, 1.0) == 0.25
    for n, k in [(16, 4), (256, 16), (10, 2)]:
        rate = R.rate_uniform(n, k)
        for t in range(12):
            assert R.predicted_phi(rate, t) <= F(1, k**t)
    with pytest.raises(RangeError):
        R.predicted_phi(0.5, -1)


def test_rate_prediction():
    pred = R.RatePrediction(F(1, 2), F(3, 4))
    assert pred.curve(2) == [0.75, 0.375, 0.1875]
    with pytest.raises(RangeError):
        R.RatePrediction(F(3, 2))


def test_rounds_for_target_examples():
    assert R.rounds_for_target(F(1, 2), 256, 1) == 8
    assert R.rounds_for_target(0.5, 256, 1) == 8
    assert R.rounds_for_target(1 - 256 ** -0.5, 256, 2) == 4
    assert R.rounds_for_target(1, 256, 3) == 1
    with pytest.raises(RangeError):
        R.rounds_for_target(0, 256)
    with pytest.raises(RangeError):
        R.rounds_for_target(F(1, 2), 256, 0)


def test_rounds_for_target_is_minimal():
    for rate in (F(1, 3), F(9, 17), F(16, 17), F(1, 100)):
        for n in (16, 100, 256):
            for b in (1, 2, 3):
                t = R.rounds_for_target(rate, n, b)
                assert (1 - rate) ** t <= F(1, n**b)
                assert t == 1 or (1 - rate) ** (t - 1) > F(1, n**b)
                assert t == math.ceil(b * math.log(n) / math.log(1 / (1 - rate))) or abs(
                    b * math.log(n) / math.log(1 / (1 - rate)) - round(b * math.log(n) / math.log(1 / (1 - rate)))
                ) < 1e-9


def test_theorem3_special_cases():
    for n in (16, 64, 256, 1024):
        for b in (1, 2, 3):
            for rate in (F(1, 2), F(3, 5), F(9, 10)):
                assert R.rounds_for_target(rate, n, b) <= math.ceil(b * math.log2(n))
            for c in (1, 2, 4):
                rate = 1 - n ** (-1 / c)
                if rate > 0:
                    assert R.rounds_for_target(rate, n, b) <= b * c


def test_markov_rounds():
    assert R.markov_rounds(F(1, 2), 256, 1) == 16
    assert R.markov_rounds(1 - 256 ** -0.5, 256, 2) == 8
    assert R.markov_rounds(1, 256, 1) == 2


def test_corrupted_server_allowance():
    # up to the allowance of corrupted servers the rate stays >= 1 - n^(-1/c), so bc rounds suffice
    for n, k, c in [(256, 16, 2), (64, 8, 2), (4096, 16, 3), (1024, 32, 2)]:
        m = n // k
        allowed = R.corrupted_server_allowance(n, k, c)
        for z in range(0, m + 1):
            rate = R.rate_corrupt_servers(n, k, m - z)
            meets = rate >= 1 - n ** (-1 / c) - 1e-12
            assert meets == (z <= allowed + 1e-9)
            if z <= allowed and rate > 0:
                for b in (1, 2):
                    assert R.rounds_for_target(rate, n, b) <= b * c


@pytest.mark.parametrize("n, k, f", [(6, 3, 1), (6, 2, 1), (8, 4, 2)])
def test_oracle_arbitrates_marked_formulas(n, k, f):
    oracle = exact_rate(validate_config(n, k, None, f)).rate
    assert R.rate_fake_derived(n, k, f) == oracle
    assert R.rate_fake_paper(n, k, f) != oracle
