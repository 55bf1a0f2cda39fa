"""Shared fixtures: small problem instances and an isolated log directory."""

import pytest

from pageopt.core.linalg import RandomSource
from pageopt.core.problems.logistic import make_nonconvex_logistic, make_synthetic_logistic_data
from pageopt.core.problems.quadratic import (
    make_heterogeneous_quadratic,
    make_shared_curvature_quadratic,
)


@pytest.fixture(autouse=True)
def isolated_log_dir(tmp_path, monkeypatch):
    """Keep the rotating log file out of the home directory."""
    monkeypatch.setenv("PAGEOPT_LOG_DIR", str(tmp_path / "logs"))


@pytest.fixture
def shared_problem():
    """Shared-curvature quadratic with d=4, n=30 and f(0) - f* = 1."""
    return make_shared_curvature_quadratic(RandomSource(11), d=4, n=30, spread=1.0, condition=4.0, delta0=1.0)


@pytest.fixture
def hetero_problem():
    """Heterogeneous quadratic with d=3, n=20 and f(0) - f* = 1."""
    return make_heterogeneous_quadratic(RandomSource(12), d=3, n=20, condition=4.0, heterogeneity=0.5, delta0=1.0)


@pytest.fixture
def tiny_problem():
    """Heterogeneous quadratic small enough for exact enumeration."""
    return make_heterogeneous_quadratic(RandomSource(13), d=2, n=4, condition=4.0, heterogeneity=1.5)


@pytest.fixture
def logistic_problem():
    """Nonconvex logistic regression on 40 synthetic samples in 3 dimensions."""
    features, labels = make_synthetic_logistic_data(RandomSource(14), n=40, d=3)
    return make_nonconvex_logistic(features, labels, lam=0.1)
