"""Quantile tracker: warm starts, the P-control update, and coverage control."""

from __future__ import annotations

import math

import numpy as np
import pytest

from flucaster.conformal import (
    LEVELS,
    QuantileTracker,
    default_learning_rate,
    empirical_quantile,
    init_tracker,
    interval,
    update,
)
from flucaster.errors import ConfigError


def quantile_oracle(values, level):
    """Type-2 (averaged inverted CDF) quantile, written out longhand."""
    xs = sorted(values)
    n = len(xs)
    h = n * level
    if abs(h - round(h)) < 1e-12 and 1 <= round(h) < n:
        k = int(round(h))
        return 0.5 * (xs[k - 1] + xs[k])
    k = max(1, math.ceil(h - 1e-12))
    return xs[min(k, n) - 1]


def test_warm_start_midpoint_convention():
    tracker = init_tracker([1.0, 2.0, 3.0, 4.0], 0.50, 0.1)
    assert tracker.radius == 2.5
    assert tracker.radius == quantile_oracle([1, 2, 3, 4], 0.50)


def test_warm_start_zero_residuals():
    tracker = init_tracker([0.0, 0.0, 0.0], 0.80, 0.1)
    assert tracker.radius == 0.0


def test_warm_start_95th_percentile_of_0_to_99():
    values = list(range(100))
    tracker = init_tracker(values, 0.95, 0.1)
    assert tracker.radius == quantile_oracle(values, 0.95)
    assert tracker.radius == 94.5


def test_quantile_matches_oracle_on_random_samples():
    rng = np.random.default_rng(0)
    for _ in range(50):
        values = rng.standard_normal(int(rng.integers(1, 40))).tolist()
        for level in LEVELS:
            assert empirical_quantile(values, level) == pytest.approx(
                quantile_oracle(values, level), abs=1e-12
            )


def test_warm_start_needs_residuals():
    with pytest.raises(ConfigError):
        init_tracker([], 0.5, 0.1)


def test_update_examples():
    t = QuantileTracker(level=0.80, learning_rate=0.0, radius=1.0)
    assert update(t, 5.0).radius == 1.0  # eta = 0 freezes the radius

    t = QuantileTracker(level=0.80, learning_rate=0.1, radius=1.0)
    missed = update(t, 2.0)
    assert missed.radius == pytest.approx(1.0 + 0.1 * (1.0 - 0.2), abs=1e-12)  # 1.08
    covered = update(t, 0.5)
    assert covered.radius == pytest.approx(1.0 + 0.1 * (0.0 - 0.2), abs=1e-12)  # 0.98
    assert missed.history == covered.history == 1


def test_update_boundary_score_counts_as_covered():
    t = QuantileTracker(level=0.80, learning_rate=0.1, radius=1.0)
    assert update(t, 1.0).radius < 1.0


def test_radius_clipped_at_zero():
    t = QuantileTracker(level=0.50, learning_rate=0.4, radius=0.1)
    for _ in range(5):
        t = t.update(0.0)
    assert t.radius == 0.0


def test_negative_score_rejected():
    t = QuantileTracker(level=0.50, learning_rate=0.1, radius=1.0)
    with pytest.raises(ConfigError):
        t.update(-0.5)


def test_interval_examples():
    t = QuantileTracker(level=0.80, learning_rate=0.1, radius=0.5)
    assert interval(t, 2.0) == (1.5, 2.5)
    assert interval(t, 0.2) == (0.0, 0.7)
    degenerate = QuantileTracker(level=0.80, learning_rate=0.1, radius=0.0)
    assert interval(degenerate, 3.3) == (3.3, 3.3)


def test_interval_never_reversed_for_negative_points():
    t = QuantileTracker(level=0.80, learning_rate=0.1, radius=0.2)
    lo, hi = t.interval(-1.0)
    assert lo <= hi == 0.0


def test_nested_warm_starts_are_monotone():
    rng = np.random.default_rng(1)
    residuals = np.abs(rng.standard_normal(200))
    trackers = {level: init_tracker(residuals, level, 0.1) for level in LEVELS}
    assert trackers[0.50].radius <= trackers[0.80].radius <= trackers[0.95].radius


def test_default_learning_rate_rule():
    residuals = list(range(1, 101))
    # 0.1 times the 90th percentile under the midpoint convention
    assert default_learning_rate(residuals) == pytest.approx(
        0.1 * quantile_oracle(residuals, 0.9), abs=1e-12
    )


def test_long_run_coverage_on_synthetic_stream():
    rng = np.random.default_rng(2)
    warm = np.abs(rng.standard_normal(200))
    stream = np.abs(rng.standard_normal(500))
    for level in LEVELS:
        eta = default_learning_rate(warm)
        tracker = init_tracker(warm, level, eta)
        misses = 0
        for score in stream:
            misses += score > tracker.radius
            tracker = tracker.update(score)
        rate = misses / len(stream)
        assert abs(rate - (1.0 - level)) <= 0.05, (level, rate)
