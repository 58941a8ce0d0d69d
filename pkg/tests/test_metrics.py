import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechscore.metrics import (confusion_matrix, mse, pearson, qwk,
                                 round_to_grade, weight_matrix)


class TestQwk:
    def test_weight_matrix_n3(self):
        expected = [[0, 0.25, 1], [0.25, 0, 0.25], [1, 0.25, 0]]
        assert np.allclose(weight_matrix(3), expected, atol=1e-15)

    def test_perfect_agreement(self):
        assert qwk([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0

    def test_antidiagonal_is_minus_one(self):
        assert abs(qwk([0, 1], [1, 0], 2) - (-1.0)) < 1e-12

    def test_degenerate_constant(self):
        flags = []
        assert qwk([1, 1, 1], [1, 1, 1], 3, flags) == 1.0
        assert flags == ["qwk_degenerate_agreement"]

    def test_confusion_layout(self):
        out = confusion_matrix([0, 0, 1], [0, 1, 1], 2)
        assert out.tolist() == [[1.0, 1.0], [0.0, 1.0]]
        assert out.sum() == 3

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        h = rng.integers(0, 4, 200)
        p = rng.integers(0, 4, 200)
        assert abs(qwk(h, p, 4) - qwk(p, h, 4)) < 1e-12

    def test_scale_reversal_invariance(self):
        rng = np.random.default_rng(9)
        h = rng.integers(0, 5, 300)
        p = rng.integers(0, 5, 300)
        assert abs(qwk(h, p, 5) - qwk(4 - h, 4 - p, 5)) < 1e-12

    def test_independence_baseline(self):
        rng = np.random.default_rng(123)
        h = rng.integers(0, 5, 10000)
        p = rng.integers(0, 5, 10000)
        assert abs(qwk(h, p, 5)) < 0.05

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                    min_size=2, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_qwk_bounded_and_symmetric(self, pairs):
        h = [a for a, _ in pairs]
        p = [b for _, b in pairs]
        value = qwk(h, p, 4)
        assert value <= 1.0 + 1e-12
        assert abs(value - qwk(p, h, 4)) < 1e-10


class TestPearson:
    def test_identity(self):
        assert abs(pearson([1, 2, 3, 4], [1, 2, 3, 4]) - 1.0) < 1e-12

    def test_negative_affine(self):
        a = np.array([0.5, 1.0, 2.0, 7.0])
        assert abs(pearson(a, -2 * a + 7) - (-1.0)) < 1e-12

    def test_hand_example(self):
        assert abs(pearson([1, 2, 3], [1, 2, 4]) - 0.9819805060619659) < 1e-12

    def test_constant_flagged(self):
        flags = []
        assert pearson([1, 1, 1], [1, 2, 3], flags) == 0.0
        assert flags == ["pearson_constant_input"]


class TestMse:
    def test_identical(self):
        assert mse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_example(self):
        assert abs(mse([1, 2], [1, 3]) - 0.5) < 1e-15

    def test_single_pair(self):
        assert mse([0.0], [3.0]) == 9.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse([1, 2], [1])


class TestRoundToGrade:
    @pytest.mark.parametrize("raw,n,expected", [
        (2.4, 5, 2), (4.9, 5, 4), (-0.3, 5, 0), (2.5, 5, 3), (1.5, 5, 2),
    ])
    def test_cases(self, raw, n, expected):
        assert round_to_grade(raw, n) == expected

    def test_non_finite(self):
        with pytest.raises(ValueError):
            round_to_grade(float("nan"), 3)
