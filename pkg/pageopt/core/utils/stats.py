"""Sample statistics used by Monte Carlo checks and experiment summaries."""

import math
import statistics
from typing import Sequence, Tuple


def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """
    Sample mean and standard error of the mean.

    Args:
        values: Non-empty sample

    Returns:
        (mean, standard error); the standard error is 0 for a single value
    """
    if not values:
        raise ValueError("mean_and_se needs at least one value")
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, 0.0
    return mean, statistics.stdev(values) / math.sqrt(len(values))
