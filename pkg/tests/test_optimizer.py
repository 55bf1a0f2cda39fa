"""Tests for the PAGE loop and its GD/SGD reductions."""

import logging

import numpy as np
import pytest

from pageopt.core.estimator import EstimatorParams
from pageopt.core.linalg import RandomSource, norm_sq
from pageopt.core.optimizer import (
    DIVERGENCE_LIMIT,
    PageConfig,
    branch_counts,
    resolve_x0,
    run_gd,
    run_page,
    run_sgd,
)
from pageopt.core.problems import make_shared_curvature_quadratic, streaming_view
from pageopt.core.theory import grad_complexity
from pageopt.core.utils.errors import InvalidParameterError
from pageopt.core.utils.json_schema import Branch
from pageopt.core.utils.stats import mean_and_se


def page_config(problem, T=30, seed=0, eta=None, b=None, b_prime=2, p=0.2, **kwargs):
    b = b or problem.n
    eta = eta if eta is not None else 0.5 / problem.constants.L
    return PageConfig(eta=eta, params=EstimatorParams(b=b, b_prime=b_prime, p=p), T=T, seed=seed, **kwargs)


class TestResolveX0:
    """Tests for initial-point resolution."""

    def test_named(self):
        """zeros and ones are what they say."""
        np.testing.assert_array_equal(resolve_x0("zeros", 3, 0), np.zeros(3))
        np.testing.assert_array_equal(resolve_x0("ones", 3, 0), np.ones(3))

    def test_gaussian_depends_only_on_seed(self):
        """gaussian draws from child 0 of the run seed."""
        np.testing.assert_array_equal(resolve_x0("gaussian", 4, 5), RandomSource(5).child(0).gaussian(4))
        assert not np.array_equal(resolve_x0("gaussian", 4, 5), resolve_x0("gaussian", 4, 6))

    def test_explicit_wrong_dimension(self):
        """An explicit point must match the problem dimension."""
        with pytest.raises(InvalidParameterError, match="dimension"):
            resolve_x0(np.zeros(2), 3, 0)

    def test_unknown_name(self):
        """Unknown initializer names are rejected."""
        with pytest.raises(InvalidParameterError, match="Unknown initializer"):
            resolve_x0("uniform", 3, 0)


class TestPageConfig:
    """Tests for configuration validation."""

    def test_zero_iterations(self, hetero_problem):
        """T must be at least 1."""
        with pytest.raises(InvalidParameterError, match="T must be"):
            page_config(hetero_problem, T=0)

    def test_negative_stepsize(self, hetero_problem):
        """eta may not be negative."""
        with pytest.raises(InvalidParameterError, match="eta"):
            page_config(hetero_problem, eta=-0.1)

    def test_bad_mode(self, hetero_problem):
        """mode is finite or online."""
        with pytest.raises(InvalidParameterError, match="mode"):
            page_config(hetero_problem, mode="batch")


class TestRunPage:
    """Tests for complete runs."""

    def test_trace_shape(self, hetero_problem):
        """The trace has T + 1 records and the returned index lies in [0, T)."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=25))
        assert len(result.trace) == 26
        assert [r.t for r in result.trace] == list(range(26))
        assert 0 <= result.chosen_index < 25
        assert not result.aborted

    def test_same_seed_same_run(self, hetero_problem):
        """Runs are reproducible from their seed."""
        config = page_config(hetero_problem, seed=4, diagnostics_interval=5)
        a, b = run_page(hetero_problem, config), run_page(hetero_problem, config)
        np.testing.assert_array_equal(a.x_hat, b.x_hat)
        assert a.trace == b.trace
        assert a.chosen_index == b.chosen_index

    def test_different_seeds_differ(self, hetero_problem):
        """Different seeds give different branch sequences."""
        a = run_page(hetero_problem, page_config(hetero_problem, T=60, seed=1))
        b = run_page(hetero_problem, page_config(hetero_problem, T=60, seed=2))
        assert [r.branch for r in a.trace] != [r.branch for r in b.trace]

    def test_chosen_index_from_first_draw(self, hetero_problem):
        """The returned index is the first integer drawn from the run seed."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=40, seed=9))
        assert result.chosen_index == int(RandomSource(9).generator.integers(0, 40))

    def test_counters_match_branches(self, hetero_problem):
        """paper_calls = b + big * b + small * b' and oracle_calls doubles the small part."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=50, b=10, b_prime=3, p=0.3))
        big, small = branch_counts(result.trace)
        assert (big, small) == (result.big_steps, result.small_steps)
        assert big + small == 50
        assert result.paper_calls == 10 + 10 * big + 3 * small
        assert result.oracle_calls == 10 + 10 * big + 6 * small

    def test_diagnostics_schedule(self, hetero_problem):
        """Diagnostics at every interval step, the returned index and t = T."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=20, diagnostics_interval=5))
        measured = {r.t for r in result.trace if r.has_diagnostics}
        assert {0, 5, 10, 15, 20} <= measured
        assert result.chosen_index in measured
        assert result.chosen_record.grad_norm_sq is not None

    def test_lyapunov_recorded_when_f_star_known(self, hetero_problem):
        """Phi = f - f* + eta / (2p) ||g - grad f||^2."""
        config = page_config(hetero_problem, T=5, diagnostics_interval=1)
        record = run_page(hetero_problem, config).trace[3]
        expected = (
            record.f_val - hetero_problem.constants.f_star
            + config.eta / (2 * config.params.p) * record.est_err_sq
        )
        assert record.lyapunov == pytest.approx(expected)

    def test_zero_stepsize_stays_put(self, hetero_problem):
        """eta = 0 returns x0 whatever the draws."""
        result = run_page(hetero_problem, page_config(hetero_problem, eta=0.0, x0="ones", seed=3))
        np.testing.assert_array_equal(result.x_hat, np.ones(3))

    def test_branch_history(self, hetero_problem):
        """record_branches returns one flag per iteration."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=30), record_branches=True)
        assert len(result.branch_history) == 30
        assert sum(result.branch_history) == result.big_steps

    def test_on_step_callback(self, hetero_problem):
        """on_step sees every iteration with x_next = x_t - eta g_t."""
        config = page_config(hetero_problem, T=10)
        seen = []

        def on_step(t, x_t, g_t, x_next):
            np.testing.assert_allclose(x_next, x_t - config.eta * g_t)
            seen.append(t)

        run_page(hetero_problem, config, on_step=on_step)
        assert seen == list(range(10))

    def test_divergence_aborts(self, shared_problem, caplog):
        """A stepsize far above 2/L blows up and the run is aborted with a warning."""
        config = page_config(shared_problem, T=2000, eta=50.0, p=1.0, b_prime=1, x0="ones")
        with caplog.at_level(logging.WARNING):
            result = run_page(shared_problem, config)
        assert result.aborted
        assert result.aborted_at is not None and result.aborted_at <= 2000
        assert np.all(np.isfinite(result.x_hat))
        assert any("diverged" in r.message for r in caplog.records)

    def test_streaming_run_is_reproducible(self, shared_problem):
        """An online run re-seeds the view from the run seed."""
        view = streaming_view(shared_problem, RandomSource(0))
        config = page_config(shared_problem, T=20, b=8, mode="online", seed=5)
        a, b = run_page(view, config), run_page(view, config)
        np.testing.assert_array_equal(a.x_hat, b.x_hat)
        assert a.paper_calls == b.paper_calls

    def test_chosen_index_is_uniform(self, hetero_problem):
        """Over 1000 seeds the returned index passes a chi-square uniformity test on {0..T-1} at the 1% level."""
        T = 10
        counts = np.zeros(T)
        for seed in range(1000):
            counts[run_page(hetero_problem, page_config(hetero_problem, T=T, seed=seed)).chosen_index] += 1
        expected = 1000 / T
        chi_square = float(np.sum((counts - expected) ** 2 / expected))
        assert chi_square < 21.666  # 99th percentile, 9 degrees of freedom

    def test_divergence_detected_without_diagnostics(self, shared_problem):
        """|f| above the limit aborts at the same step whether or not diagnostics are recorded."""
        settings = dict(T=2000, eta=50.0, p=1.0, b_prime=1, x0="ones")
        quiet = run_page(shared_problem, page_config(shared_problem, **settings))
        measured = run_page(shared_problem, page_config(shared_problem, diagnostics_interval=1, **settings))
        assert quiet.aborted and measured.aborted
        assert quiet.aborted_at == measured.aborted_at
        assert all(abs(r.f_val) <= DIVERGENCE_LIMIT for r in measured.trace)
        assert norm_sq(quiet.x_hat) <= DIVERGENCE_LIMIT ** 2


class TestReductions:
    """Tests for GD and SGD as special cases of PAGE."""

    def test_gd_converges(self, shared_problem):
        """Full-gradient descent with eta = 1/L drives the gradient to zero."""
        result = run_gd(shared_problem, 1.0 / shared_problem.constants.L, T=300)
        assert result.trace[-1].grad_norm_sq < 1e-10
        assert result.paper_calls == 30 * 301
        assert all(r.branch is Branch.BIG for r in result.trace[1:])

    def test_gd_matches_plain_recursion(self, hetero_problem):
        """run_gd follows x <- x - eta grad f(x) exactly."""
        eta = 0.5 / hetero_problem.constants.L
        result = run_gd(hetero_problem, eta, T=10, seed=1)
        x = np.zeros(3)
        iterates = [x]
        for _ in range(10):
            x = x - eta * hetero_problem.full_gradient(x)
            iterates.append(x)
        np.testing.assert_allclose(result.x_hat, iterates[result.chosen_index], atol=1e-12)

    def test_gd_needs_finite_sum(self, shared_problem):
        """GD is undefined on a streaming problem."""
        with pytest.raises(InvalidParameterError, match="finite-sum"):
            run_gd(streaming_view(shared_problem, RandomSource(0)), 0.1, T=5)

    def test_sgd_counts(self, hetero_problem):
        """SGD charges b per iteration plus b for the initial estimate."""
        result = run_sgd(hetero_problem, 0.1, b=4, T=12)
        assert result.paper_calls == result.oracle_calls == 4 * 13
        assert result.small_steps == 0

    def test_page_with_certain_big_step_is_gd(self, hetero_problem):
        """p = 1 and b = n reproduce run_gd bit for bit whatever b' is."""
        eta = 0.5 / hetero_problem.constants.L
        page = run_page(hetero_problem, page_config(hetero_problem, T=25, seed=3, eta=eta, b_prime=7, p=1.0,
                                                    diagnostics_interval=1))
        gd = run_gd(hetero_problem, eta, T=25, seed=3, diagnostics_interval=1)
        np.testing.assert_array_equal(page.x_hat, gd.x_hat)
        assert [r.f_val for r in page.trace] == [r.f_val for r in gd.trace]
        assert page.paper_calls == gd.paper_calls == 20 * 26

    def test_sgd_without_spread_is_gd(self):
        """Identical components make minibatch SGD follow GD exactly."""
        problem = make_shared_curvature_quadratic(RandomSource(11), d=4, n=30, spread=0.0, delta0=1.0)
        eta = 1.0 / problem.constants.L
        sgd = run_sgd(problem, eta, b=5, T=40, seed=2, diagnostics_interval=1)
        gd = run_gd(problem, eta, T=40, seed=2, diagnostics_interval=1)
        np.testing.assert_array_equal(sgd.x_hat, gd.x_hat)
        assert [r.grad_norm_sq for r in sgd.trace] == [r.grad_norm_sq for r in gd.trace]
        assert sgd.paper_calls == 5 * 41

    def test_gd_gradient_norm_decreases(self, shared_problem):
        """With eta = 1/L on a strongly convex quadratic every step shrinks ||grad f||."""
        result = run_gd(shared_problem, 1.0 / shared_problem.constants.L, T=50, diagnostics_interval=1)
        norms = [r.grad_norm_sq for r in result.trace]
        assert all(later < earlier for earlier, later in zip(norms, norms[1:]))
        assert norms[-1] < 1e-8 * norms[0]

    def test_page_below_sgd_noise_floor(self, shared_problem):
        """At one stepsize and one paper-call budget PAGE ends below minibatch SGD, averaged over 50 seeds."""
        eta = 0.5 / shared_problem.constants.L
        b, b_prime, p, T = 30, 2, 2 / 32, 200
        T_sgd = int(grad_complexity(b, T, p, b_prime) // b_prime) - 1
        page, sgd = [], []
        for seed in range(50):
            config = PageConfig(eta=eta, params=EstimatorParams(b=b, b_prime=b_prime, p=p), T=T, seed=seed)
            page.append(run_page(shared_problem, config).chosen_record.grad_norm_sq)
            sgd.append(run_sgd(shared_problem, eta, b=b_prime, T=T_sgd, seed=seed).chosen_record.grad_norm_sq)
        assert np.mean(page) < np.mean(sgd)


class TestOracleAccounting:
    """Tests for the expected gradient count across many seeds."""

    def test_mean_paper_calls_match_formula(self, hetero_problem):
        """Mean paper_calls sits within three standard errors of b + T (p b + (1 - p) b')."""
        b, b_prime, p, T = 10, 3, 0.3, 50
        calls = []
        for s in range(200):
            result = run_page(hetero_problem, page_config(hetero_problem, T=T, seed=s, b=b, b_prime=b_prime, p=p))
            assert result.paper_calls == b + result.big_steps * b + result.small_steps * b_prime
            calls.append(float(result.paper_calls))
        mean, se = mean_and_se(calls)
        assert abs(mean - grad_complexity(b, T, p, b_prime)) <= 3 * se

    def test_oracle_calls_double_small_steps(self, hetero_problem):
        """oracle_calls - paper_calls is b' per small step."""
        result = run_page(hetero_problem, page_config(hetero_problem, T=40, seed=9, b=10, b_prime=3, p=0.3))
        assert result.oracle_calls - result.paper_calls == 3 * result.small_steps
