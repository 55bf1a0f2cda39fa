"""Quadratic finite-sum families with exactly certified constants."""

from typing import Optional

import numpy as np
from numpy.typing import NDArray

from pageopt.core.linalg import Matrix, RandomSource, Vector, power_iteration
from pageopt.core.problems.base import FiniteSumProblem, IndexArray
from pageopt.core.utils.errors import InvalidParameterError, ProblemError
from pageopt.core.utils.json_schema import CertificationTag, ProblemConstants
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)

_SYMMETRY_RTOL = 1e-12


def _require_symmetric(matrix: Matrix, what: str) -> None:
    if not np.allclose(matrix, np.swapaxes(matrix, -1, -2), rtol=_SYMMETRY_RTOL, atol=_SYMMETRY_RTOL):
        raise ProblemError(f"{what} must be symmetric")


class SharedCurvatureQuadratic(FiniteSumProblem):
    """
    f_i(x) = 1/2 x^T A x - b_i^T x with one shared SPD matrix A.

    grad f_i(x) - grad f(x) = b_bar - b_i does not depend on x, so
    sigma^2 = mean ||b_i - b_bar||^2, L = lambda_max(A) and
    f* = f(A^{-1} b_bar) are all exact.
    """

    family = "shared_quadratic"

    def __init__(self, curvature: Matrix, offsets: NDArray[np.float64], mean_offset: Optional[Vector] = None):
        """
        Args:
            curvature: Shared symmetric positive-definite matrix A, shape (d, d)
            offsets: Per-component linear terms b_i, shape (n, d)
            mean_offset: b_bar; defaults to the row mean of offsets

        Raises:
            ProblemError: If A is not symmetric positive definite or shapes disagree
        """
        A = np.array(curvature, dtype=np.float64)
        offsets = np.array(offsets, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ProblemError(f"Curvature must be square, got shape {A.shape}")
        if offsets.ndim != 2 or offsets.shape[1] != A.shape[0] or offsets.shape[0] < 1:
            raise ProblemError(f"Offsets must have shape (n, {A.shape[0]}), got {offsets.shape}")
        _require_symmetric(A, "Curvature")

        eigvals = np.linalg.eigvalsh(A)
        if eigvals[0] <= 0.0:
            raise ProblemError(f"Degenerate curvature: smallest eigenvalue {eigvals[0]:.3g} <= 0")

        b_bar = offsets.mean(axis=0) if mean_offset is None else np.array(mean_offset, dtype=np.float64)
        self.A = A
        self.b_bar = b_bar
        self.deviations = offsets - b_bar
        self.x_star = np.linalg.solve(A, b_bar)

        sigma_sq = float(np.mean(np.sum(self.deviations ** 2, axis=1)))
        constants = ProblemConstants(
            L=float(eigvals[-1]),
            sigma_sq=sigma_sq,
            f_star=self._value(self.x_star),
            how_certified=CertificationTag.ANALYTIC,
        )
        super().__init__(d=A.shape[0], n=offsets.shape[0], constants=constants)

    def _value(self, x: Vector) -> float:
        return float(0.5 * x @ self.A @ x - self.b_bar @ x)

    def value(self, x: Vector) -> float:
        self._check_point(x)
        return self._value(x)

    def full_gradient(self, x: Vector) -> Vector:
        self._check_point(x)
        return self.A @ x - self.b_bar

    def _values_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return self._value(x) - self.deviations[idx] @ x

    def _gradients_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return (self.A @ x - self.b_bar)[None, :] - self.deviations[idx]

    def _minibatch_gradient_at(self, idx: IndexArray, x: Vector) -> Vector:
        # zero deviations give back full_gradient bit for bit
        return (self.A @ x - self.b_bar) - self.deviations[idx].mean(axis=0)

    def _minibatch_difference_at(self, idx: IndexArray, x_new: Vector, x_old: Vector) -> Vector:
        return self.A @ (x_new - x_old)


class HeterogeneousQuadratic(FiniteSumProblem):
    """
    f_i(x) = 1/2 x^T A_i x - b_i^T x with distinct symmetric A_i.

    The tight average-smoothness constant is
    L = sqrt(lambda_max((1/n) sum A_i^T A_i)), found by power iteration.
    Components may be indefinite; the averaged matrix must be positive
    definite so that f* exists. No variance bound is certified.
    """

    family = "hetero_quadratic"

    def __init__(self, curvatures: NDArray[np.float64], offsets: NDArray[np.float64], rng: Optional[RandomSource] = None):
        """
        Args:
            curvatures: Symmetric matrices A_i, shape (n, d, d)
            offsets: Linear terms b_i, shape (n, d)
            rng: Source for the power-iteration start vector (seed 0 if None)

        Raises:
            ProblemError: If a matrix is not symmetric or the averaged system is singular
        """
        As = np.array(curvatures, dtype=np.float64)
        offsets = np.array(offsets, dtype=np.float64)
        if As.ndim != 3 or As.shape[1] != As.shape[2] or As.shape[0] < 1:
            raise ProblemError(f"Curvatures must have shape (n, d, d), got {As.shape}")
        n, d, _ = As.shape
        if offsets.shape != (n, d):
            raise ProblemError(f"Offsets must have shape ({n}, {d}), got {offsets.shape}")
        _require_symmetric(As, "Every curvature matrix")

        self.As = As
        self.offsets = offsets
        self.A_bar = As.mean(axis=0)
        self.b_bar = offsets.mean(axis=0)

        avg_eigvals = np.linalg.eigvalsh(self.A_bar)
        if avg_eigvals[0] <= 0.0:
            raise ProblemError(
                f"Averaged curvature is singular or indefinite (smallest eigenvalue {avg_eigvals[0]:.3g})"
            )
        self.x_star = np.linalg.solve(self.A_bar, self.b_bar)

        self.gram = np.einsum("kji,kjl->il", As, As) / n
        L_sq = power_iteration(self.gram, rng or RandomSource(0))
        constants = ProblemConstants(
            L=float(np.sqrt(L_sq)),
            f_star=self._value(self.x_star),
            how_certified=CertificationTag.COMPUTED_BY_ORACLE,
        )
        super().__init__(d=d, n=n, constants=constants)

    def _value(self, x: Vector) -> float:
        return float(0.5 * x @ self.A_bar @ x - self.b_bar @ x)

    def value(self, x: Vector) -> float:
        self._check_point(x)
        return self._value(x)

    def full_gradient(self, x: Vector) -> Vector:
        self._check_point(x)
        return self.A_bar @ x - self.b_bar

    def _values_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        Ax = np.einsum("kij,j->ki", self.As[idx], x)
        return 0.5 * Ax @ x - self.offsets[idx] @ x

    def _gradients_at(self, idx: IndexArray, x: Vector) -> NDArray[np.float64]:
        return np.einsum("kij,j->ki", self.As[idx], x) - self.offsets[idx]

    def _minibatch_difference_at(self, idx: IndexArray, x_new: Vector, x_old: Vector) -> Vector:
        return np.einsum("kij,j->ki", self.As[idx], x_new - x_old).mean(axis=0)


def _spd_with_spectrum(rng: RandomSource, d: int, condition: float) -> Matrix:
    """Random SPD matrix with eigenvalues geometric in [1/condition, 1]."""
    if condition < 1.0:
        raise InvalidParameterError(f"condition must be >= 1, got {condition}")
    q, r = np.linalg.qr(rng.gaussian(d, d))
    q = q * np.sign(np.diag(r))
    eigvals = np.geomspace(1.0 / condition, 1.0, d) if d > 1 else np.ones(1)
    A = (q * eigvals) @ q.T
    return 0.5 * (A + A.T)


def _mean_offset(rng: RandomSource, A: Matrix, delta0: Optional[float]) -> Vector:
    """b_bar ~ N(0, I), rescaled so that f(0) - f* = b_bar^T A^{-1} b_bar / 2 equals delta0."""
    b_bar = rng.gaussian(A.shape[0])
    if delta0 is not None:
        if delta0 <= 0:
            raise InvalidParameterError(f"delta0 must be positive, got {delta0}")
        current = 0.5 * b_bar @ np.linalg.solve(A, b_bar)
        b_bar = b_bar * np.sqrt(delta0 / current)
    return b_bar


def _centered_noise(rng: RandomSource, n: int, d: int) -> NDArray[np.float64]:
    noise = rng.gaussian(n, d)
    return noise - noise.mean(axis=0)


def make_shared_curvature_quadratic(
    rng: RandomSource,
    d: int,
    n: int,
    spread: float,
    condition: float = 10.0,
    delta0: Optional[float] = None,
) -> SharedCurvatureQuadratic:
    """
    Random shared-curvature quadratic.

    Args:
        rng: Random source
        d: Dimension (>= 1)
        n: Component count (>= 2)
        spread: Scale of the per-component offset deviations (>= 0); 0 gives identical components
        condition: Condition number of A (lambda_max(A) = 1)
        delta0: If set, f(0) - f* is rescaled to this value

    Returns:
        SharedCurvatureQuadratic with exact L, sigma^2 and f*
    """
    if d < 1 or n < 2:
        raise InvalidParameterError(f"Need d >= 1 and n >= 2, got d={d}, n={n}")
    if spread < 0:
        raise InvalidParameterError(f"spread must be >= 0, got {spread}")
    A = _spd_with_spectrum(rng.child(0), d, condition)
    b_bar = _mean_offset(rng.child(1), A, delta0)
    offsets = b_bar + spread * _centered_noise(rng.child(2), n, d)
    problem = SharedCurvatureQuadratic(A, offsets, mean_offset=b_bar)
    logger.debug(f"Built {problem!r} with sigma^2={problem.constants.sigma_sq:.6g}")
    return problem


def make_heterogeneous_quadratic(
    rng: RandomSource,
    d: int,
    n: int,
    condition: float = 10.0,
    heterogeneity: float = 0.5,
    offset_spread: float = 1.0,
    delta0: Optional[float] = None,
) -> HeterogeneousQuadratic:
    """
    Random heterogeneous quadratic: A_i = A_bar + S_i with centered symmetric S_i.

    Args:
        rng: Random source
        d: Dimension (>= 1)
        n: Component count (>= 1)
        condition: Condition number of the averaged matrix A_bar (lambda_max(A_bar) = 1)
        heterogeneity: Scale of the symmetric perturbations S_i
        offset_spread: Scale of the per-component offset deviations
        delta0: If set, f(0) - f* is rescaled to this value

    Returns:
        HeterogeneousQuadratic with tight average-smoothness L and exact f*
    """
    if d < 1 or n < 1:
        raise InvalidParameterError(f"Need d >= 1 and n >= 1, got d={d}, n={n}")
    A_bar = _spd_with_spectrum(rng.child(0), d, condition)
    G = rng.child(1).gaussian(n, d, d)
    S = heterogeneity * (G + np.swapaxes(G, 1, 2)) / (2.0 * np.sqrt(d))
    S -= S.mean(axis=0)
    b_bar = _mean_offset(rng.child(2), A_bar, delta0)
    offsets = b_bar + offset_spread * _centered_noise(rng.child(3), n, d)
    problem = HeterogeneousQuadratic(A_bar + S, offsets, rng=rng.child(4))
    logger.debug(f"Built {problem!r}")
    return problem
