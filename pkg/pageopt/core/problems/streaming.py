"""Online view of a finite-sum problem."""

import copy
from typing import Any

import numpy as np
from numpy.typing import NDArray

from pageopt.core.linalg import RandomSource, Vector, sample_indices
from pageopt.core.problems.base import FiniteSumProblem, IndexArray
from pageopt.core.utils.errors import MissingConstantError


class StreamingView(FiniteSumProblem):
    """
    f(x) = E_zeta[F(x, zeta)] with zeta uniform over the base components.

    Every oracle call redraws its indices from the view's own random
    source; the index argument only fixes how many samples are taken.
    ``n`` is None, so the algorithm never sees an exact full gradient.
    ``value`` and ``full_gradient`` stay available for diagnostics and are
    never charged as oracle calls.
    """

    def __init__(self, base: FiniteSumProblem, rng: RandomSource):
        """
        Raises:
            MissingConstantError: If the base problem has no certified sigma^2
        """
        if base.constants.sigma_sq is None:
            raise MissingConstantError(
                f"Streaming view of {base.family} needs a certified sigma^2"
            )
        if base.is_streaming:
            base = base.base  # type: ignore[attr-defined]
        self.base = base
        self.rng = rng
        self.family = base.family
        super().__init__(d=base.d, n=None, constants=base.constants)

    def with_rng(self, rng: RandomSource) -> "StreamingView":
        """Same view over the same base, drawing from another stream."""
        clone = copy.copy(self)
        clone.rng = rng
        return clone

    def resolve_indices(self, indices: Any) -> IndexArray:
        k = len(indices)
        return sample_indices(self.rng, self.base.n, k, with_replacement=True)

    def draw_indices(self, rng: RandomSource, k: int) -> IndexArray:
        # placeholders; resolve_indices replaces them with fresh draws
        return np.zeros(k, dtype=np.int64)

    def all_indices(self) -> IndexArray:
        raise MissingConstantError("A streaming problem has no finite index set")

    def value(self, x: Vector) -> float:
        return self.base.value(x)

    def full_gradient(self, x: Vector) -> Vector:
        return self.base.full_gradient(x)

    def _values_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return self.base._values_at(idx, x)

    def _gradients_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return self.base._gradients_at(idx, x)

    def _minibatch_gradient_at(self, idx: IndexArray, x: Vector) -> Vector:
        return self.base._minibatch_gradient_at(idx, x)

    def _minibatch_difference_at(self, idx: IndexArray, x_new: Vector, x_old: Vector) -> Vector:
        return self.base._minibatch_difference_at(idx, x_new, x_old)


def streaming_view(problem: FiniteSumProblem, rng: RandomSource) -> StreamingView:
    """Online form of ``problem`` drawing its samples from ``rng``."""
    return StreamingView(problem, rng)
