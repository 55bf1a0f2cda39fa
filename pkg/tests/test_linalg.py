"""Tests for vector arithmetic and the seeded random source."""

import numpy as np
import pytest

from pageopt.core.linalg import (
    RandomSource,
    as_vector,
    axpy,
    bernoulli,
    dot,
    norm_sq,
    power_iteration,
    random_unit_vector,
    sample_indices,
    zeros,
)
from pageopt.core.utils.errors import DimensionMismatchError, InvalidParameterError, NonFiniteError


class TestVectors:
    """Tests for Vector construction and arithmetic."""

    def test_as_vector_copies_and_freezes(self):
        """as_vector returns a read-only float copy."""
        source = [1, 2, 3]
        v = as_vector(source)
        assert v.dtype == np.float64
        with pytest.raises(ValueError):
            v[0] = 5.0

    def test_as_vector_rejects_matrix(self):
        """Two-dimensional input is not a vector."""
        with pytest.raises(DimensionMismatchError, match="1-D"):
            as_vector([[1.0, 2.0], [3.0, 4.0]])

    def test_as_vector_rejects_nan(self):
        """NaN entries are rejected."""
        with pytest.raises(NonFiniteError):
            as_vector([1.0, float("nan")])

    def test_dot_and_norm_sq_agree(self):
        """norm_sq(a) equals dot(a, a)."""
        a = as_vector([3.0, -4.0])
        assert dot(a, a) == norm_sq(a) == 25.0

    def test_dot_dimension_mismatch(self):
        """Vectors of different length cannot be multiplied."""
        with pytest.raises(DimensionMismatchError, match="Dimension mismatch"):
            dot(as_vector([1.0, 2.0]), as_vector([1.0, 2.0, 3.0]))

    def test_axpy(self):
        """axpy computes alpha x + y without touching its inputs."""
        x = as_vector([1.0, 2.0])
        y = as_vector([10.0, 20.0])
        result = axpy(-2.0, x, y)
        np.testing.assert_array_equal(result, [8.0, 16.0])
        np.testing.assert_array_equal(x, [1.0, 2.0])

    def test_axpy_overflow_is_non_finite(self):
        """Overflow to Inf raises NonFiniteError."""
        with pytest.raises(NonFiniteError):
            axpy(1e308, as_vector([1e308]), zeros(1))


class TestRandomSource:
    """Tests for seeded streams and their children."""

    def test_same_seed_same_stream(self):
        """Two sources with one seed draw identical values."""
        a, b = RandomSource(42), RandomSource(42)
        np.testing.assert_array_equal(a.gaussian(5), b.gaussian(5))

    def test_child_is_deterministic(self):
        """child(k) is the same stream every time and does not advance the parent."""
        parent = RandomSource(7)
        first = parent.child(3).gaussian(4)
        np.testing.assert_array_equal(parent.child(3).gaussian(4), first)
        np.testing.assert_array_equal(parent.gaussian(2), RandomSource(7).gaussian(2))

    def test_children_differ(self):
        """Sibling streams are distinct."""
        parent = RandomSource(7)
        assert not np.array_equal(parent.child(0).gaussian(4), parent.child(1).gaussian(4))

    def test_split(self):
        """split(k) gives children 0..k-1."""
        streams = RandomSource(9).split(3)
        assert [s.spawn_key for s in streams] == [(0,), (1,), (2,)]

    def test_negative_seed_rejected(self):
        """Seeds must be unsigned."""
        with pytest.raises(InvalidParameterError, match="64-bit"):
            RandomSource(-1)


class TestSampling:
    """Tests for index draws and Bernoulli trials."""

    def test_with_replacement_range(self):
        """Indices lie in [0, n)."""
        idx = sample_indices(RandomSource(1), 5, 1000)
        assert idx.min() >= 0 and idx.max() <= 4
        assert len(idx) == 1000

    def test_with_replacement_is_uniform(self):
        """n = 10: every index is drawn with frequency 0.1 +- 0.001."""
        draws = 4_000_000
        idx = sample_indices(RandomSource(5), 10, draws)
        freq = np.bincount(idx, minlength=10) / draws
        assert len(freq) == 10
        assert np.all(np.abs(freq - 0.1) <= 0.001)

    def test_without_replacement_distinct(self):
        """Without replacement the draw is a permutation when k = n."""
        idx = sample_indices(RandomSource(1), 10, 10, with_replacement=False)
        assert sorted(idx.tolist()) == list(range(10))

    def test_without_replacement_too_many(self):
        """Cannot draw more distinct indices than exist."""
        with pytest.raises(InvalidParameterError, match="distinct"):
            sample_indices(RandomSource(1), 3, 4, with_replacement=False)

    def test_bernoulli_one_is_certain(self):
        """p = 1 always succeeds."""
        rng = RandomSource(2)
        assert all(bernoulli(rng, 1.0) for _ in range(100))

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_bernoulli_rejects_bad_probability(self, p):
        """p must lie in (0, 1]."""
        with pytest.raises(InvalidParameterError):
            bernoulli(RandomSource(2), p)

    def test_bernoulli_frequency(self):
        """Empirical frequency is close to p."""
        rng = RandomSource(3)
        hits = sum(bernoulli(rng, 0.3) for _ in range(20_000))
        assert abs(hits / 20_000 - 0.3) < 0.015


class TestPowerIteration:
    """Tests for the largest-eigenvalue solver."""

    def test_diagonal(self):
        """Largest eigenvalue of a diagonal matrix."""
        matrix = np.diag([0.5, 3.0, 1.0])
        assert power_iteration(matrix, RandomSource(0)) == pytest.approx(3.0, rel=1e-10)

    def test_matches_eigvalsh(self):
        """Agrees with a dense eigensolver on a random PSD matrix."""
        g = RandomSource(4).gaussian(6, 6)
        matrix = g @ g.T
        expected = np.linalg.eigvalsh(matrix)[-1]
        result = power_iteration(matrix, RandomSource(0))
        assert result == pytest.approx(expected, rel=1e-8)
        assert result <= expected * (1 + 1e-12)

    def test_zero_matrix(self):
        """The zero matrix has eigenvalue 0."""
        assert power_iteration(np.zeros((3, 3)), RandomSource(0)) == 0.0

    def test_random_unit_vector(self):
        """Directions have unit length and depend only on the stream."""
        v = random_unit_vector(RandomSource(8), 5)
        assert v.shape == (5,)
        assert norm_sq(v) == pytest.approx(1.0)
        assert np.array_equal(v, random_unit_vector(RandomSource(8), 5))

    def test_random_unit_vector_rejects_zero_dimension(self):
        """d must be positive."""
        with pytest.raises(InvalidParameterError):
            random_unit_vector(RandomSource(8), 0)
