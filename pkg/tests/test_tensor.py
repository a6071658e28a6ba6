import numpy as np
import pytest

from convae import ShapeError, SizeOverflowError, Tensor, dot, zeros
from convae.tensor import coords_of, flat_index, full


class TestZeros:
    def test_small_shape(self):
        t = zeros((1, 1, 2, 2))
        assert t.shape == (1, 1, 2, 2)
        assert np.array_equal(t.data, np.zeros((1, 1, 2, 2)))

    def test_empty_dimension(self):
        t = zeros((0, 1, 1, 1))
        assert t.size == 0
        assert t.shape == (0, 1, 1, 1)

    def test_model1_conv1_map_count(self):
        # first feature-map stack: 4 channels of 20x20
        t = zeros((1, 4, 20, 20))
        assert t.size == 1600
        assert float(t.data.sum()) == 0.0

    def test_negative_dimension_rejected(self):
        with pytest.raises(ShapeError):
            zeros((1, -1, 2, 2))

    def test_wrong_rank_rejected(self):
        with pytest.raises(ShapeError):
            zeros((1, 2, 3))

    def test_size_overflow(self):
        with pytest.raises(SizeOverflowError):
            zeros((2**21, 2**21, 2**21, 2**21))


class TestDot:
    def test_ones(self):
        a = full((1, 1, 2, 2), 1.0)
        assert dot(a, a) == 4.0

    def test_zeros_annihilate(self, rng):
        b = Tensor(rng.normal(size=(2, 3, 4, 5)))
        assert dot(zeros((2, 3, 4, 5)), b) == 0.0

    def test_hand_sum(self):
        a = Tensor(np.array([1.0, 2, 3, 4]).reshape(1, 1, 2, 2))
        b = Tensor(np.array([4.0, 3, 2, 1]).reshape(1, 1, 2, 2))
        assert dot(a, b) == 20.0  # 4 + 6 + 6 + 4

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dot(zeros((1, 1, 2, 2)), zeros((1, 1, 4, 1)))


class TestLayout:
    def test_flat_index_round_trip(self):
        shape = (2, 3, 4, 5)
        flat = 0
        for n in range(2):
            for c in range(3):
                for h in range(4):
                    for w in range(5):
                        assert flat_index(shape, n, c, h, w) == flat
                        assert coords_of(shape, flat) == (n, c, h, w)
                        flat += 1

    def test_flat_index_matches_numpy_order(self, rng):
        arr = rng.normal(size=(2, 3, 4, 5))
        t = Tensor(arr)
        flat = t.data.ravel()
        assert flat[flat_index(t.shape, 1, 2, 3, 4)] == arr[1, 2, 3, 4]

    def test_reshape_preserves_flat_data(self, rng):
        t = Tensor(rng.normal(size=(1, 4, 2, 2)))
        r = t.reshaped((1, 16, 1, 1))
        assert np.array_equal(r.data.ravel(), t.data.ravel())

    def test_reshape_count_mismatch(self):
        with pytest.raises(ShapeError):
            zeros((1, 4, 2, 2)).reshaped((1, 15, 1, 1))
