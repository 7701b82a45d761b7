"""Online quantile tracking for prediction intervals.

Each tracker maintains a single interval half-width (radius) for one nominal
coverage level and adjusts it after every realized absolute residual:

    radius <- max(0, radius + eta * (1{score > radius} - (1 - level)))

Misses push the radius up by eta * level, covers pull it down by
eta * (1 - level), so the long-run miss fraction is controlled at 1 - level
for any bounded score sequence. Intervals are symmetric around the point
prediction with the lower bound clipped at zero (%ILI is nonnegative).

Trackers are immutable; update() returns a new state. One tracker exists per
(state, class, variant, level) and must see scores in chronological order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

LEVELS = (0.50, 0.80, 0.95)

# Empirical-quantile convention for warm starts: inverted CDF with averaging
# at jumps ("midpoint"), e.g. the 0.50-quantile of {1,2,3,4} is 2.5.
_QUANTILE_METHOD = "averaged_inverted_cdf"


@dataclass(frozen=True)
class QuantileTracker:
    level: float
    learning_rate: float
    radius: float
    history: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be nonnegative")
        if self.radius < 0:
            raise ConfigError("radius must be nonnegative")

    def update(self, score: float) -> "QuantileTracker":
        """Fold in one realized absolute residual."""
        if score < 0:
            raise ConfigError("scores are absolute residuals and must be >= 0")
        miss = 1.0 if score > self.radius else 0.0
        new_radius = max(
            0.0, self.radius + self.learning_rate * (miss - (1.0 - self.level))
        )
        return replace(self, radius=new_radius, history=self.history + 1)

    def interval(self, point: float) -> tuple[float, float]:
        """Symmetric interval around the point, clipped at zero (%ILI >= 0).

        The upper clip only matters for points below -radius, where the raw
        formula would invert the interval.
        """
        return (max(0.0, point - self.radius), max(0.0, point + self.radius))


def empirical_quantile(values: Sequence[float], level: float) -> float:
    """Midpoint-convention empirical quantile used for warm starts."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ConfigError("empty sample for empirical quantile")
    return float(np.quantile(arr, level, method=_QUANTILE_METHOD))


def init_tracker(
    residuals: Iterable[float], level: float, learning_rate: float
) -> QuantileTracker:
    """Warm-start a tracker at the empirical level-quantile of |residuals|."""
    scores = [abs(r) for r in residuals]
    if not scores:
        raise ConfigError("tracker warm start needs at least one residual")
    return QuantileTracker(
        level=level,
        learning_rate=learning_rate,
        radius=empirical_quantile(scores, level),
    )


def default_learning_rate(residuals: Iterable[float], scale: float = 0.1) -> float:
    """Step-size rule: scale times the 90th percentile of |residuals|."""
    scores = [abs(r) for r in residuals]
    if not scores:
        raise ConfigError("learning-rate rule needs at least one residual")
    return scale * empirical_quantile(scores, 0.90)


def update(tracker: QuantileTracker, score: float) -> QuantileTracker:
    return tracker.update(score)


def interval(tracker: QuantileTracker, point: float) -> tuple[float, float]:
    return tracker.interval(point)
