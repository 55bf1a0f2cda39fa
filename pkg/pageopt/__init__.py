"""
PAGE Optimizer (pageopt)

Variance-reduced stochastic gradient descent with the PAGE estimator,
a closed-form theory calculator and an empirical verifier of the
inequalities behind its convergence guarantee.
"""

__version__ = "0.1.0"
__author__ = "pageopt contributors"
__license__ = "MIT"

from pageopt.core.utils.logging import setup_logging

# Initialize logging on import
setup_logging()
