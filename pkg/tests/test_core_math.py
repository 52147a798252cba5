"""Stable scalar primitives: log-sum-exp, softmax, energy, MSP, cross-entropy."""

import math

import numpy as np
import pytest

from balen import (
    InvalidArgument,
    cross_entropy,
    cross_entropy_batch,
    energy_score,
    energy_score_batch,
    log_sum_exp,
    log_sum_exp_batch,
    msp_score,
    msp_score_batch,
    softmax,
    softmax_batch,
)


def lse_oracle(v, T=1.0):
    # independent path: shift by max, fsum in plain Python floats
    v = [float(x) for x in v]
    m = max(v)
    return T * math.log(math.fsum(math.exp((x - m) / T) for x in v)) + m


class TestLogSumExp:
    def test_two_zeros(self):
        assert log_sum_exp([0.0, 0.0], 1.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_max_shift_dominance(self):
        assert log_sum_exp([1000.0, 0.0], 1.0) == pytest.approx(1000.0, abs=1e-9)

    def test_temperature_two(self):
        assert log_sum_exp([2.0, 2.0], 2.0) == pytest.approx(2 * (1 + math.log(2)), abs=1e-12)

    def test_no_overflow_huge_entries(self):
        v = [1e300, -1e300, 0.0]
        out = log_sum_exp(v, 1.0)
        assert math.isfinite(out)
        assert out == pytest.approx(1e300)

    def test_rejects_empty(self):
        with pytest.raises(InvalidArgument):
            log_sum_exp([], 1.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgument):
            log_sum_exp([1.0, math.nan], 1.0)
        with pytest.raises(InvalidArgument):
            log_sum_exp([1.0, math.inf], 1.0)

    def test_rejects_bad_temperature(self):
        for T in (0.0, -1.0):
            with pytest.raises(InvalidArgument):
                log_sum_exp([1.0, 2.0], T)

    def test_matches_oracle_random(self, rng):
        for _ in range(200):
            k = rng.integers(2, 9)
            v = rng.normal(0, 10, size=k)
            T = float(rng.uniform(0.1, 5.0))
            assert log_sum_exp(v, T) == pytest.approx(lse_oracle(v, T), rel=1e-12, abs=1e-12)

    def test_bounds_random(self, rng):
        # max(v) <= lse <= max(v) + T log K
        for _ in range(300):
            k = int(rng.integers(2, 12))
            v = rng.normal(0, 50, size=k)
            T = float(rng.uniform(0.05, 10.0))
            out = log_sum_exp(v, T)
            assert out >= v.max() - 1e-12
            assert out <= v.max() + T * math.log(k) + 1e-12

    def test_batch_matches_scalar(self, rng):
        x = rng.normal(0, 5, size=(17, 4))
        batch = log_sum_exp_batch(x, 1.7)
        for i in range(17):
            assert batch[i] == pytest.approx(log_sum_exp(x[i], 1.7), abs=1e-14)


class TestEnergyScore:
    def test_two_zeros(self):
        assert energy_score([0.0, 0.0], 1.0) == pytest.approx(-math.log(2), abs=1e-12)

    def test_constant_vector(self):
        for k in (2, 3, 7):
            c = 1.75
            assert energy_score([c] * k, 1.0) == pytest.approx(-c - math.log(k), abs=1e-12)

    def test_hand_value(self):
        want = -(3 + math.log1p(math.exp(-2)))  # -log(e^3 + e^1)
        assert energy_score([3.0, 1.0], 1.0) == pytest.approx(want, abs=1e-9)
        assert energy_score([3.0, 1.0], 1.0) == pytest.approx(-3.126928, abs=1e-6)

    def test_translation_covariance(self, rng):
        for _ in range(100):
            v = rng.normal(0, 3, size=int(rng.integers(2, 8)))
            c = float(rng.normal(0, 10))
            T = float(rng.uniform(0.2, 4.0))
            assert energy_score(v + c, T) == pytest.approx(energy_score(v, T) - c, abs=1e-10)

    def test_batch_matches_scalar(self, rng):
        x = rng.normal(0, 5, size=(11, 3))
        batch = energy_score_batch(x, 0.8)
        for i in range(11):
            assert batch[i] == pytest.approx(energy_score(x[i], 0.8), abs=1e-14)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)

    def test_dominance_no_overflow(self):
        p = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0, abs=1e-12)
        assert p[1] == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        np.testing.assert_allclose(softmax([math.log(3), math.log(1)]), [0.75, 0.25], atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(100):
            p = softmax(rng.normal(0, 20, size=int(rng.integers(2, 10))))
            assert abs(p.sum() - 1.0) < 1e-12
            assert np.all(p >= 0)

    def test_translation_invariance(self, rng):
        for _ in range(100):
            v = rng.normal(0, 3, size=5)
            c = float(rng.normal(0, 10))
            np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)

    def test_batch_matches_scalar(self, rng):
        x = rng.normal(0, 5, size=(9, 6))
        batch = softmax_batch(x)
        for i in range(9):
            np.testing.assert_allclose(batch[i], softmax(x[i]), atol=1e-15)


class TestMspScore:
    def test_uniform_two(self):
        assert msp_score([0.0, 0.0]) == pytest.approx(0.5, abs=1e-12)

    def test_hand_value(self):
        assert msp_score([math.log(9), 0.0]) == pytest.approx(0.9, abs=1e-12)

    def test_dominant(self):
        assert msp_score([100.0, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)

    def test_in_unit_interval(self, rng):
        for _ in range(100):
            k = int(rng.integers(2, 9))
            s = msp_score(rng.normal(0, 30, size=k))
            assert 1.0 / k <= s + 1e-12
            assert s <= 1.0

    def test_batch_matches_scalar(self, rng):
        x = rng.normal(0, 5, size=(8, 4))
        batch = msp_score_batch(x)
        for i in range(8):
            assert batch[i] == pytest.approx(msp_score(x[i]), abs=1e-15)


class TestCrossEntropy:
    def test_uniform(self):
        assert cross_entropy([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_correct(self):
        assert cross_entropy([10.0, -10.0], 0) <= 1e-8

    def test_hand_value(self):
        want = 2 + math.log1p(math.exp(-2))
        assert cross_entropy([1.0, 3.0], 0) == pytest.approx(want, abs=1e-9)

    def test_rejects_bad_label(self):
        for y in (-1, 2, 5):
            with pytest.raises(InvalidArgument):
                cross_entropy([0.0, 0.0], y)

    def test_nonnegative_and_two_path(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 8))
            v = rng.normal(0, 15, size=k)
            y = int(rng.integers(0, k))
            ce = cross_entropy(v, y)
            assert ce >= -1e-12
            assert ce == pytest.approx(-math.log(softmax(v)[y]), abs=1e-10)

    def test_batch_matches_scalar(self, rng):
        x = rng.normal(0, 5, size=(10, 3))
        y = rng.integers(0, 3, size=10)
        batch = cross_entropy_batch(x, y)
        for i in range(10):
            assert batch[i] == pytest.approx(cross_entropy(x[i], int(y[i])), abs=1e-14)
