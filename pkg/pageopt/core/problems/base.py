"""Finite-sum objective oracle shared by every problem family."""

import copy
from abc import ABC, abstractmethod
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from pageopt.core.linalg import RandomSource, Vector, sample_indices
from pageopt.core.utils.errors import DimensionMismatchError
from pageopt.core.utils.json_schema import ProblemConstants

IndexArray = NDArray[np.int64]


class FiniteSumProblem(ABC):
    """
    f(x) = (1/n) sum_i f_i(x) with per-component oracles.

    ``n`` is None for a streaming problem. Subclasses implement the
    ``_*_at`` hooks on already-resolved indices; the public methods resolve
    indices once per call, so both points of ``minibatch_difference`` see
    the same sample even when a streaming view redraws them.
    """

    family = "abstract"
    has_analytic_gradient = True

    def __init__(self, d: int, n: Optional[int], constants: ProblemConstants):
        self.d = int(d)
        self.n = n
        self._constants = constants

    @property
    def constants(self) -> ProblemConstants:
        return self._constants

    @property
    def is_streaming(self) -> bool:
        return self.n is None

    def with_constants(self, **overrides: Any) -> "FiniteSumProblem":
        """Shallow copy with some certified constants replaced."""
        clone = copy.copy(self)
        clone._constants = self._constants.model_copy(update=overrides)
        return clone

    # -- oracles -----------------------------------------------------------

    @abstractmethod
    def value(self, x: Vector) -> float:
        """f(x)."""

    @abstractmethod
    def full_gradient(self, x: Vector) -> Vector:
        """Exact gradient of f at x."""

    @abstractmethod
    def _values_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        """f_i(x) for each resolved index."""

    @abstractmethod
    def _gradients_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        """Rows grad f_i(x) for each resolved index, shape (k, d)."""

    def _minibatch_gradient_at(self, idx: IndexArray, x: Vector) -> Vector:
        return self._gradients_at(idx, x).mean(axis=0)

    def _minibatch_difference_at(self, idx: IndexArray, x_new: Vector, x_old: Vector) -> Vector:
        diff = self._gradients_at(idx, x_new) - self._gradients_at(idx, x_old)
        return diff.mean(axis=0)

    def resolve_indices(self, indices: IndexArray) -> IndexArray:
        """Indices actually evaluated; finite problems use them as given."""
        return np.asarray(indices, dtype=np.int64)

    def draw_indices(self, rng: RandomSource, k: int) -> IndexArray:
        """k i.i.d. uniform component indices."""
        return sample_indices(rng, self.n, k, with_replacement=True)

    def all_indices(self) -> IndexArray:
        return np.arange(self.n, dtype=np.int64)

    def component_value(self, i: int, x: Vector) -> float:
        self._check_point(x)
        return float(self._values_at(self.resolve_indices(np.array([i])), x)[0])

    def component_gradient(self, i: int, x: Vector) -> Vector:
        self._check_point(x)
        return self._gradients_at(self.resolve_indices(np.array([i])), x)[0]

    def component_values(self, indices: IndexArray, x: Vector) -> NDArray[np.float64]:
        self._check_point(x)
        return self._values_at(self.resolve_indices(indices), x)

    def component_gradients(self, indices: IndexArray, x: Vector) -> NDArray[np.float64]:
        self._check_point(x)
        return self._gradients_at(self.resolve_indices(indices), x)

    def minibatch_gradient(self, indices: IndexArray, x: Vector) -> Vector:
        """(1/|I|) sum_{i in I} grad f_i(x)."""
        self._check_point(x)
        return self._minibatch_gradient_at(self.resolve_indices(indices), x)

    def minibatch_difference(self, indices: IndexArray, x_new: Vector, x_old: Vector) -> Vector:
        """(1/|I'|) sum_{i in I'} (grad f_i(x_new) - grad f_i(x_old)) on one shared sample."""
        self._check_point(x_new)
        self._check_point(x_old)
        return self._minibatch_difference_at(self.resolve_indices(indices), x_new, x_old)

    def _check_point(self, x: Vector) -> None:
        if x.shape != (self.d,):
            raise DimensionMismatchError(
                f"{self.family} problem has dimension {self.d}, got point of shape {x.shape}"
            )

    def describe(self) -> dict:
        """Short metadata dict for logs and reports."""
        c = self.constants
        return {
            "family": self.family,
            "d": self.d,
            "n": "streaming" if self.n is None else self.n,
            "L": c.L,
            "sigma_sq": c.sigma_sq,
            "f_star": c.f_star,
            "how_certified": c.how_certified.value,
        }

    def __repr__(self) -> str:
        n = "streaming" if self.n is None else self.n
        return f"{type(self).__name__}(d={self.d}, n={n}, L={self.constants.L:.6g})"
