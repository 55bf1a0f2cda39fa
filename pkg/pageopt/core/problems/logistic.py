"""Logistic loss with a nonconvex coordinate-wise regularizer."""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from pageopt.core.linalg import RandomSource, Vector
from pageopt.core.problems.base import FiniteSumProblem, IndexArray
from pageopt.core.utils.errors import InvalidParameterError, ProblemError
from pageopt.core.utils.json_schema import CertificationTag, ProblemConstants
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)


def _sigmoid_neg(z: NDArray[np.float64]) -> NDArray[np.float64]:
    """1 / (1 + exp(z)) without overflow."""
    return np.exp(-np.logaddexp(0.0, z))


class NonconvexLogistic(FiniteSumProblem):
    """
    f_i(x) = log(1 + exp(-y_i a_i^T x)) + lam * sum_j x_j^2 / (1 + x_j^2).

    The logistic Hessian is bounded by ||a_i||^2 / 4 and the regularizer's
    second derivative by 2 lam, giving the certified upper bound
    L = sqrt(mean_i (||a_i||^2 / 4 + 2 lam)^2). Both terms are nonnegative,
    so 0 is a certified lower bound of f; f* itself is unknown.
    """

    family = "logistic"

    def __init__(self, features: NDArray[np.float64], labels: NDArray[np.float64], lam: float = 0.1):
        """
        Args:
            features: Data matrix, shape (n, d)
            labels: Labels in {-1, +1}, shape (n,)
            lam: Regularization weight (>= 0)

        Raises:
            ProblemError: On an empty dataset, inconsistent shapes or bad labels
        """
        X = np.array(features, dtype=np.float64)
        y = np.array(labels, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ProblemError(f"Empty or malformed dataset (features shape {X.shape})")
        if y.shape != (X.shape[0],):
            raise ProblemError(f"Expected {X.shape[0]} labels, got shape {y.shape}")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ProblemError("Labels must be -1 or +1")
        if lam < 0:
            raise InvalidParameterError(f"lam must be >= 0, got {lam}")
        if not np.all(np.isfinite(X)):
            raise ProblemError("Features must be finite")

        self.features = X
        self.labels = y
        self.lam = float(lam)
        self.signed = X * y[:, None]

        row_bounds = np.sum(X ** 2, axis=1) / 4.0 + 2.0 * self.lam
        constants = ProblemConstants(
            L=float(np.sqrt(np.mean(row_bounds ** 2))),
            f_lower_bound=0.0,
            how_certified=CertificationTag.ANALYTIC_UPPER_BOUND,
        )
        super().__init__(d=X.shape[1], n=X.shape[0], constants=constants)

    def _regularizer(self, x: Vector) -> float:
        return float(self.lam * np.sum(x ** 2 / (1.0 + x ** 2)))

    def _regularizer_gradient(self, x: Vector) -> Vector:
        return self.lam * 2.0 * x / (1.0 + x ** 2) ** 2

    def value(self, x: Vector) -> float:
        self._check_point(x)
        margins = self.signed @ x
        return float(np.mean(np.logaddexp(0.0, -margins))) + self._regularizer(x)

    def full_gradient(self, x: Vector) -> Vector:
        self._check_point(x)
        weights = _sigmoid_neg(self.signed @ x)
        return -(weights @ self.signed) / self.n + self._regularizer_gradient(x)

    def _values_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return np.logaddexp(0.0, -(self.signed[idx] @ x)) + self._regularizer(x)

    def _gradients_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        rows = self.signed[idx]
        weights = _sigmoid_neg(rows @ x)
        return -weights[:, None] * rows + self._regularizer_gradient(x)[None, :]


def make_nonconvex_logistic(
    features: NDArray[np.float64], labels: NDArray[np.float64], lam: float = 0.1
) -> NonconvexLogistic:
    """Build the regularized logistic problem from a dataset."""
    return NonconvexLogistic(features, labels, lam)


def make_synthetic_logistic_data(
    rng: RandomSource, n: int, d: int, noise: float = 0.1
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Gaussian features with labels planted by a random hyperplane.

    Args:
        rng: Random source
        n: Sample count
        d: Feature count
        noise: Std of Gaussian noise added to the planted margin

    Returns:
        (features (n, d), labels (n,) in {-1, +1})
    """
    if n < 1 or d < 1:
        raise InvalidParameterError(f"Need n >= 1 and d >= 1, got n={n}, d={d}")
    features = rng.child(0).gaussian(n, d)
    w_true = rng.child(1).gaussian(d)
    margins = features @ w_true + noise * rng.child(2).gaussian(n)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    return features, labels


def load_logistic_csv(path: Union[str, Path]) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Load a header-less CSV of rows "label,feat1,...,featd".

    Raises:
        ProblemError: If the file is empty, non-numeric, or has labels outside {-1, +1}
    """
    try:
        frame = pd.read_csv(path, header=None)
    except pd.errors.EmptyDataError:
        raise ProblemError(f"Dataset {path} is empty")
    except (OSError, pd.errors.ParserError) as e:
        raise ProblemError(f"Cannot read dataset {path}: {e}")

    if frame.shape[1] < 2:
        raise ProblemError(f"Dataset {path} needs a label column and at least one feature")
    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise ProblemError(f"Dataset {path} has non-numeric entries: {e}")

    labels, features = values[:, 0], values[:, 1:]
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ProblemError(f"Dataset {path}: labels must be -1 or +1")
    logger.info(f"Loaded {features.shape[0]} samples with {features.shape[1]} features from {path}")
    return features, labels
