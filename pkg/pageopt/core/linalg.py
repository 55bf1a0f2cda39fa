"""Dense vector arithmetic and the seeded random source shared by every module.

Vectors are plain 1-D float64 numpy arrays; ``as_vector`` is the validating
constructor and returns a read-only copy. Every operation returns a fresh
array and never writes into its inputs.

``RandomSource`` wraps a numpy ``Generator`` driven by the counter-based
Philox bit generator. Child streams are derived through ``SeedSequence``
spawn keys, so ``RandomSource(s).child(k)`` is the same stream every time
and statistically independent of its parent and siblings.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple, TypeAlias, Union

import numpy as np
from numpy.typing import NDArray

from pageopt.core.utils.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteError,
)

Vector: TypeAlias = NDArray[np.float64]
Matrix: TypeAlias = NDArray[np.float64]

VectorLike = Union[Vector, Sequence[float], Iterable[float]]


def as_vector(values: VectorLike) -> Vector:
    """
    Build a Vector from any 1-D sequence of reals.

    Args:
        values: Entries of the vector

    Returns:
        Read-only float64 copy

    Raises:
        DimensionMismatchError: If the input is not one-dimensional
        NonFiniteError: If any entry is NaN or Inf
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"Expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("Vector entries must be finite")
    arr.setflags(write=False)
    return arr


def zeros(d: int) -> Vector:
    """Zero vector of dimension d."""
    return as_vector(np.zeros(d))


def _require_same_length(a: Vector, b: Vector) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a: Vector, b: Vector) -> float:
    """Inner product sum(a_i * b_i)."""
    _require_same_length(a, b)
    return float(np.dot(a, b))


def norm_sq(a: Vector) -> float:
    """Squared Euclidean norm; identical to dot(a, a)."""
    return float(np.dot(a, a))


def axpy(alpha: float, x: Vector, y: Vector) -> Vector:
    """
    Return alpha * x + y.

    Raises:
        DimensionMismatchError: If x and y differ in length
        NonFiniteError: If the result has a non-finite entry
    """
    _require_same_length(x, y)
    result = alpha * x + y
    if not np.all(np.isfinite(result)):
        raise NonFiniteError("axpy produced a non-finite entry")
    return result


class RandomSource:
    """Seeded, single-owner random stream with deterministic child streams."""

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        """
        Args:
            seed: 64-bit unsigned seed
            spawn_key: Path of child indices from the root stream
        """
        if seed < 0 or seed >= 2**64:
            raise InvalidParameterError(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        self._seed_seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.Philox(self._seed_seq))

    def child(self, key: int) -> "RandomSource":
        """Deterministic child stream number ``key``; does not advance this stream."""
        return RandomSource(self.seed, self.spawn_key + (int(key),))

    def split(self, k: int) -> List["RandomSource"]:
        """Children 0..k-1."""
        return [self.child(i) for i in range(k)]

    def gaussian(self, *shape: int) -> NDArray[np.float64]:
        """Standard normal draws of the given shape."""
        return self.generator.standard_normal(shape)

    def uniform(self) -> float:
        """One draw from [0, 1)."""
        return float(self.generator.random())

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"


def sample_indices(
    rng: RandomSource, n: int, k: int, with_replacement: bool = True
) -> NDArray[np.int64]:
    """
    Draw k indices uniformly from [0, n).

    With replacement the draws are i.i.d.; without replacement they are k
    distinct indices (a uniformly random k-subset in random order).

    Raises:
        InvalidParameterError: If k < 1, n < 1, or k > n without replacement
    """
    if n < 1 or k < 1:
        raise InvalidParameterError(f"Need n >= 1 and k >= 1, got n={n}, k={k}")
    if with_replacement:
        return rng.generator.integers(0, n, size=k, dtype=np.int64)
    if k > n:
        raise InvalidParameterError(f"Cannot draw {k} distinct indices from {n}")
    return rng.generator.choice(n, size=k, replace=False).astype(np.int64)


def bernoulli(rng: RandomSource, p: float) -> bool:
    """
    True with probability p.

    Raises:
        InvalidParameterError: If p is outside (0, 1]
    """
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"Probability must lie in (0, 1], got {p}")
    return bool(rng.generator.random() < p)


def random_unit_vector(rng: RandomSource, d: int) -> Vector:
    """Uniformly distributed direction on the unit sphere in R^d."""
    if d < 1:
        raise InvalidParameterError(f"Dimension must be positive, got {d}")
    v = rng.gaussian(d)
    return v / np.linalg.norm(v)


def power_iteration(
    matrix: Matrix,
    rng: RandomSource,
    rtol: float = 1e-14,
    max_iter: int = 100_000,
) -> float:
    """
    Largest eigenvalue of a symmetric positive semidefinite matrix.

    Returns the Rayleigh quotient of the converged iterate, which never
    exceeds the true eigenvalue.

    Raises:
        RuntimeError: If the iteration does not converge within max_iter
    """
    v = random_unit_vector(rng, matrix.shape[0])
    eigval = np.inf
    for _ in range(max_iter):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new_eigval = float(v @ w)
        v = w / norm
        if abs(new_eigval - eigval) <= rtol * abs(new_eigval):
            return float(v @ (matrix @ v))
        eigval = new_eigval
    raise RuntimeError(f"Power iteration did not converge in {max_iter} iterations")
