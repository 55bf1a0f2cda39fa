"""Tests for problem families, the registry and the streaming view."""

import numpy as np
import pytest

from pageopt.core.linalg import RandomSource, sample_indices
from pageopt.core.problems import (
    HeterogeneousQuadratic,
    SharedCurvatureQuadratic,
    build_problem,
    load_logistic_csv,
    make_nonconvex_logistic,
    make_shared_curvature_quadratic,
    streaming_view,
)
from pageopt.core.utils.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    MissingConstantError,
    ProblemError,
)
from pageopt.core.utils.json_schema import CertificationTag, ProblemSpec


class TestSharedCurvatureQuadratic:
    """Tests for the shared-curvature family."""

    def test_constants_are_exact(self, shared_problem):
        """L, sigma^2 and f* match their definitions."""
        p = shared_problem
        assert p.constants.L == pytest.approx(np.linalg.eigvalsh(p.A)[-1])
        grads = p.component_gradients(p.all_indices(), np.zeros(p.d))
        expected_sigma = np.mean(np.sum((grads - p.full_gradient(np.zeros(p.d))) ** 2, axis=1))
        assert p.constants.sigma_sq == pytest.approx(expected_sigma)
        assert p.constants.f_star == pytest.approx(p.value(p.x_star))
        assert p.constants.how_certified is CertificationTag.ANALYTIC

    def test_initial_gap_rescaled(self, shared_problem):
        """delta0 fixes f(0) - f*."""
        gap = shared_problem.value(np.zeros(4)) - shared_problem.constants.f_star
        assert gap == pytest.approx(1.0)

    def test_gradient_vanishes_at_minimizer(self, shared_problem):
        """grad f(x*) = 0."""
        np.testing.assert_allclose(shared_problem.full_gradient(shared_problem.x_star), 0.0, atol=1e-12)

    def test_component_mean_is_full_gradient(self, shared_problem):
        """The average of every component gradient is the full gradient."""
        x = RandomSource(1).gaussian(4)
        mean = shared_problem.minibatch_gradient(shared_problem.all_indices(), x)
        np.testing.assert_allclose(mean, shared_problem.full_gradient(x), atol=1e-12)

    def test_zero_spread_has_identical_components(self):
        """spread = 0 gives sigma^2 = 0 and minibatch gradients equal to the full gradient."""
        p = make_shared_curvature_quadratic(RandomSource(3), d=3, n=10, spread=0.0)
        assert p.constants.sigma_sq == 0.0
        x = RandomSource(4).gaussian(3)
        np.testing.assert_array_equal(p.minibatch_gradient(np.array([2, 7]), x), p.full_gradient(x))

    def test_degenerate_curvature(self):
        """A singular shared matrix is rejected."""
        with pytest.raises(ProblemError, match="Degenerate"):
            SharedCurvatureQuadratic(np.diag([1.0, 0.0]), np.ones((3, 2)))

    def test_asymmetric_curvature(self):
        """A non-symmetric matrix is rejected."""
        with pytest.raises(ProblemError, match="symmetric"):
            SharedCurvatureQuadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones((3, 2)))

    def test_point_dimension_checked(self, shared_problem):
        """Oracles refuse points of the wrong dimension."""
        with pytest.raises(DimensionMismatchError):
            shared_problem.value(np.zeros(3))

    def test_negative_spread(self):
        """spread must be nonnegative."""
        with pytest.raises(InvalidParameterError):
            make_shared_curvature_quadratic(RandomSource(0), d=2, n=5, spread=-1.0)


class TestHeterogeneousQuadratic:
    """Tests for the heterogeneous family."""

    def test_smoothness_constant_is_tight(self, hetero_problem):
        """L^2 is the top eigenvalue of mean A_i^T A_i."""
        p = hetero_problem
        gram = np.mean([A.T @ A for A in p.As], axis=0)
        assert p.constants.L ** 2 == pytest.approx(np.linalg.eigvalsh(gram)[-1], rel=1e-9)
        assert p.constants.sigma_sq is None
        assert p.constants.how_certified is CertificationTag.COMPUTED_BY_ORACLE

    def test_average_smoothness_bounds_full_smoothness(self, hetero_problem):
        """The averaged Hessian's spectral norm never exceeds L."""
        spectral = np.linalg.norm(hetero_problem.A_bar, 2)
        assert spectral <= hetero_problem.constants.L * (1 + 1e-9)

    def test_minibatch_difference_shares_sample(self, hetero_problem):
        """The difference uses one index set for both points."""
        p = hetero_problem
        rng = RandomSource(5)
        x, y = rng.gaussian(3), rng.gaussian(3)
        idx = np.array([0, 4, 4, 9])
        expected = p.minibatch_gradient(idx, x) - p.minibatch_gradient(idx, y)
        np.testing.assert_allclose(p.minibatch_difference(idx, x, y), expected, atol=1e-12)

    def test_component_values_average_to_f(self, hetero_problem):
        """mean_i f_i(x) = f(x)."""
        x = RandomSource(6).gaussian(3)
        values = hetero_problem.component_values(hetero_problem.all_indices(), x)
        assert float(values.mean()) == pytest.approx(hetero_problem.value(x))

    def test_singular_average(self):
        """An averaged matrix without positive curvature is rejected."""
        As = np.stack([np.diag([1.0, -1.0]), np.diag([-1.0, 1.0])])
        with pytest.raises(ProblemError, match="singular or indefinite"):
            HeterogeneousQuadratic(As, np.zeros((2, 2)))


class TestNonconvexLogistic:
    """Tests for the regularized logistic family."""

    def test_smoothness_bound(self, logistic_problem):
        """L = sqrt(mean (||a_i||^2 / 4 + 2 lam)^2) and 0 is the lower bound."""
        p = logistic_problem
        rows = np.sum(p.features ** 2, axis=1) / 4 + 0.2
        assert p.constants.L == pytest.approx(np.sqrt(np.mean(rows ** 2)))
        assert p.constants.f_star is None
        assert p.constants.lower_bound == 0.0
        assert p.constants.how_certified is CertificationTag.ANALYTIC_UPPER_BOUND

    def test_value_at_origin(self, logistic_problem):
        """f(0) = log 2."""
        assert logistic_problem.value(np.zeros(3)) == pytest.approx(np.log(2.0))

    def test_gradient_matches_finite_differences(self, logistic_problem):
        """full_gradient agrees with central differences of value."""
        x = RandomSource(8).gaussian(3)
        h = 1e-6
        numeric = np.array([
            (logistic_problem.value(x + h * e) - logistic_problem.value(x - h * e)) / (2 * h)
            for e in np.eye(3)
        ])
        np.testing.assert_allclose(logistic_problem.full_gradient(x), numeric, rtol=1e-5, atol=1e-8)

    def test_large_margins_are_finite(self):
        """Huge margins neither overflow nor produce NaN."""
        p = make_nonconvex_logistic(np.array([[1e3], [-1e3]]), np.array([1.0, 1.0]))
        x = np.array([1e3])
        assert np.isfinite(p.value(x))
        assert np.all(np.isfinite(p.full_gradient(x)))

    def test_bad_labels(self):
        """Labels other than +-1 are rejected."""
        with pytest.raises(ProblemError, match="Labels"):
            make_nonconvex_logistic(np.ones((2, 2)), np.array([0.0, 1.0]))

    def test_empty_dataset(self):
        """An empty dataset is rejected."""
        with pytest.raises(ProblemError, match="Empty"):
            make_nonconvex_logistic(np.zeros((0, 2)), np.zeros(0))

    def test_load_csv(self, tmp_path):
        """A header-less label,features CSV loads."""
        path = tmp_path / "data.csv"
        path.write_text("1,0.5,2.0\n-1,1.5,-0.5\n1,0.0,1.0\n")
        features, labels = load_logistic_csv(path)
        assert features.shape == (3, 2)
        np.testing.assert_array_equal(labels, [1.0, -1.0, 1.0])

    def test_load_empty_csv(self, tmp_path):
        """An empty file is a ProblemError."""
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ProblemError, match="empty"):
            load_logistic_csv(path)

    def test_load_csv_bad_labels(self, tmp_path):
        """Labels outside {-1, +1} are rejected on load."""
        path = tmp_path / "bad.csv"
        path.write_text("2,0.5\n1,1.0\n")
        with pytest.raises(ProblemError, match="labels"):
            load_logistic_csv(path)


class TestRegistry:
    """Tests for building problems from a ProblemSpec."""

    def test_defaults(self):
        """Family defaults fill missing parameters."""
        problem = build_problem(ProblemSpec(family="shared_quadratic"))
        assert (problem.d, problem.n) == (10, 100)

    def test_equal_specs_equal_problems(self):
        """Same family, parameters and seed give the same instance."""
        spec = ProblemSpec(family="hetero_quadratic", params={"d": 3, "n": 8}, seed=4)
        a, b = build_problem(spec), build_problem(spec)
        np.testing.assert_array_equal(a.As, b.As)
        assert a.constants == b.constants

    def test_seed_changes_instance(self):
        """Different seeds give different instances."""
        a = build_problem(ProblemSpec(family="shared_quadratic", params={"d": 3, "n": 8}, seed=0))
        b = build_problem(ProblemSpec(family="shared_quadratic", params={"d": 3, "n": 8}, seed=1))
        assert not np.array_equal(a.A, b.A)

    def test_unknown_parameter(self):
        """Unknown generator parameters raise InvalidParameterError."""
        with pytest.raises(InvalidParameterError, match="Bad parameters"):
            build_problem(ProblemSpec(family="shared_quadratic", params={"bogus": 1}))

    def test_logistic_from_csv(self, tmp_path):
        """A path parameter loads the dataset instead of generating one."""
        path = tmp_path / "data.csv"
        path.write_text("1,0.5,2.0\n-1,1.5,-0.5\n")
        problem = build_problem(ProblemSpec(family="logistic", params={"path": str(path), "lam": 0.2}))
        assert (problem.d, problem.n) == (2, 2)
        assert problem.lam == 0.2


class TestStreamingView:
    """Tests for the online view of a finite sum."""

    def test_view_is_streaming(self, shared_problem):
        """n is None and the constants carry over."""
        view = streaming_view(shared_problem, RandomSource(0))
        assert view.is_streaming
        assert view.n is None
        assert view.constants == shared_problem.constants

    def test_requires_sigma(self, hetero_problem):
        """A base without sigma^2 cannot be streamed."""
        with pytest.raises(MissingConstantError, match="sigma"):
            streaming_view(hetero_problem, RandomSource(0))

    def test_no_index_set(self, shared_problem):
        """A streaming problem has no finite index set."""
        with pytest.raises(MissingConstantError):
            streaming_view(shared_problem, RandomSource(0)).all_indices()

    def test_indices_come_from_view_stream(self, hetero_problem):
        """Oracle calls redraw their sample from the view's own stream, once per call."""
        base = hetero_problem.with_constants(sigma_sq=1.0)
        view = streaming_view(base, RandomSource(21))
        x, y = RandomSource(1).gaussian(3), RandomSource(2).gaussian(3)
        result = view.minibatch_difference(view.draw_indices(RandomSource(99), 4), x, y)
        idx = sample_indices(RandomSource(21), base.n, 4)
        np.testing.assert_allclose(result, base.minibatch_difference(idx, x, y), atol=1e-12)

    def test_nested_view_unwraps(self, shared_problem):
        """A view of a view wraps the original finite sum."""
        inner = streaming_view(shared_problem, RandomSource(0))
        outer = streaming_view(inner, RandomSource(1))
        assert outer.base is shared_problem

    def test_with_rng_leaves_original(self, shared_problem):
        """with_rng returns a copy on another stream."""
        view = streaming_view(shared_problem, RandomSource(0))
        other = view.with_rng(RandomSource(5))
        assert other.rng.seed == 5
        assert view.rng.seed == 0
