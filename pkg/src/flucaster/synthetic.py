"""Deterministic synthetic surveillance data for desk-scale testing.

Two generators share the same seasonal template (a Gaussian bump over the
season on top of an off-season baseline):

- curve mode: template plus optionally cross-state-correlated Gaussian noise;
- AR mode: values evolve by the same lag-and-neighbor-trend dynamics the
  models estimate, so spatial variants have genuine signal to find.

Counts are derived as ili_count = round(ili_pct * total_visits / 100); the
published-percentage rounding tolerance of 0.05 therefore requires at least
1000 weekly visits, which the config validation enforces. National rows are
exact visits-weighted means of the generated states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from math import exp, sqrt

import numpy as np

from .data import Observation, ObservationTable
from .epiweek import Epiweek, season_label, week_range, weeks_in_year
from .errors import ConfigError
from .features import trend_indicator
from .geography import NATIONAL, STATE_CODES, AdjacencyGraph

# Closed under induced adjacency: every member keeps a neighbor inside the set.
NORTHEAST_CLUSTER = ("CT", "DE", "MA", "ME", "NH", "NJ", "NY", "PA", "RI", "VT")

# Lead-in/tail margin so the first/last in-season outcomes have full lag cover.
_SPAN_LEAD_WEEK = 30
_SPAN_TAIL_WEEK = 20


def _per_state(value, states: tuple[str, ...], name: str) -> dict[str, float]:
    if isinstance(value, dict):
        missing = set(states) - set(value)
        if missing:
            raise ConfigError(f"{name} missing entries for {sorted(missing)}")
        return {s: float(value[s]) for s in states}
    return {s: float(value) for s in states}


def _season_position(week: Epiweek) -> float | None:
    """Week index within the season (0 at week 40); None off-season."""
    if week.week >= 40:
        return float(week.week - 40)
    if week.week <= 18:
        return float(weeks_in_year(week.year - 1) - 40 + week.week)
    return None


@dataclass(frozen=True)
class SyntheticConfig:
    """Seasonal-curve generator settings; scalar fields accept per-state dicts."""

    states: tuple[str, ...] = NORTHEAST_CLUSTER
    start_year: int = 2011
    n_seasons: int = 3
    baseline: float | dict = 1.0
    amplitude: float | dict = 3.0
    peak_position: float | dict = 17.0
    peak_width: float | dict = 4.0
    noise_sd: float | dict = 0.25
    correlation: float = 0.5
    total_visits: int | dict = 20000
    providers: int | dict = 150
    floor: float = 0.05
    include_national: bool = True

    def seasons(self) -> list[str]:
        return [season_label(self.start_year + i) for i in range(self.n_seasons)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticConfig":
        cfg = dict(raw)
        if "states" in cfg:
            cfg["states"] = tuple(cfg["states"])
        return cls(**cfg)


def _validate_common(states, n_seasons, floor) -> None:
    unknown = set(states) - STATE_CODES
    if unknown:
        raise ConfigError(f"unknown states {sorted(unknown)}")
    if len(set(states)) != len(states) or not states:
        raise ConfigError("states must be a nonempty list of distinct codes")
    if n_seasons < 1:
        raise ConfigError("n_seasons must be >= 1")
    if floor <= 0:
        raise ConfigError("floor must be positive (log transforms need %ILI > 0)")


def _validate_visits(visits: dict[str, float]) -> dict[str, int]:
    out = {}
    for s, v in visits.items():
        if v <= 0:
            raise ConfigError(f"total_visits for {s} must be positive")
        if v < 1000:
            raise ConfigError(
                f"total_visits for {s} must be >= 1000 so rounded counts stay "
                f"within the 0.05 percentage tolerance"
            )
        out[s] = int(v)
    return out


def _span(start_year: int, n_seasons: int) -> list[Epiweek]:
    return list(
        week_range(
            Epiweek(start_year, _SPAN_LEAD_WEEK),
            Epiweek(start_year + n_seasons, _SPAN_TAIL_WEEK),
        )
    )


def _make_observation(state, week, pct, visits, providers) -> Observation:
    pct = min(float(pct), 100.0)
    count = int(round(pct * visits / 100.0))
    return Observation(
        location=state,
        week=week,
        ili_pct=pct,
        ili_count=count,
        total_visits=visits,
        providers=providers,
    )


def _national_rows(rows_by_week: dict[Epiweek, list[Observation]]) -> list[Observation]:
    out = []
    for week, group in rows_by_week.items():
        visits = sum(o.total_visits for o in group)
        count = sum(o.ili_count for o in group)
        providers = sum(o.providers for o in group)
        out.append(
            Observation(
                location=NATIONAL,
                week=week,
                ili_pct=100.0 * count / visits,
                ili_count=count,
                total_visits=visits,
                providers=providers,
            )
        )
    return out


def generate_synthetic(config: SyntheticConfig, seed: int) -> ObservationTable:
    """Curve-mode table; identical seeds give identical tables."""
    states = tuple(config.states)
    _validate_common(states, config.n_seasons, config.floor)
    baseline = _per_state(config.baseline, states, "baseline")
    amplitude = _per_state(config.amplitude, states, "amplitude")
    peak_pos = _per_state(config.peak_position, states, "peak_position")
    peak_width = _per_state(config.peak_width, states, "peak_width")
    noise_sd = _per_state(config.noise_sd, states, "noise_sd")
    visits = _validate_visits(_per_state(config.total_visits, states, "total_visits"))
    providers = {s: int(p) for s, p in _per_state(config.providers, states, "providers").items()}
    if any(p < 0 for p in providers.values()):
        raise ConfigError("providers must be nonnegative")
    if not 0.0 <= config.correlation <= 1.0:
        raise ConfigError("correlation must lie in [0, 1]")
    for s in states:
        if amplitude[s] < 0 or noise_sd[s] < 0 or peak_width[s] <= 0:
            raise ConfigError(f"invalid curve parameters for {s}")
        if baseline[s] < config.floor:
            raise ConfigError(f"baseline for {s} below the floor {config.floor}")

    def template(state: str, week: Epiweek) -> float:
        pos = _season_position(week)
        if pos is None:
            return baseline[state]
        z = (pos - peak_pos[state]) / peak_width[state]
        return baseline[state] + amplitude[state] * exp(-0.5 * z * z)

    weeks = _span(config.start_year, config.n_seasons)
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal(len(weeks))
    idio = rng.standard_normal((len(states), len(weeks)))
    rho = config.correlation

    rows_by_week: dict[Epiweek, list[Observation]] = {w: [] for w in weeks}
    for i, state in enumerate(states):
        for j, week in enumerate(weeks):
            z = sqrt(rho) * shared[j] + sqrt(1.0 - rho) * idio[i, j]
            value = max(config.floor, template(state, week) + noise_sd[state] * z)
            rows_by_week[week].append(
                _make_observation(state, week, value, visits[state], providers[state])
            )

    rows = [o for group in rows_by_week.values() for o in group]
    if config.include_national:
        rows.extend(_national_rows(rows_by_week))
    return ObservationTable(tuple(rows))


@dataclass(frozen=True)
class ARProcessConfig:
    """Lag-and-neighbor-trend process: the Neighbors variant's true model."""

    states: tuple[str, ...] = NORTHEAST_CLUSTER
    start_year: int = 2011
    n_seasons: int = 3
    baseline: float = 1.5
    amplitude: float = 2.5
    peak_position: float = 17.0
    peak_width: float = 5.0
    self_coefs: tuple[float, float, float] = (0.45, 0.2, 0.1)
    neighbor_coef: float = 0.12
    eps: float = 0.05
    noise_sd: float = 0.3
    floor: float = 0.05
    total_visits: int = 20000
    providers: int = 150
    include_national: bool = True

    def seasons(self) -> list[str]:
        return [season_label(self.start_year + i) for i in range(self.n_seasons)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ARProcessConfig":
        cfg = dict(raw)
        if "states" in cfg:
            cfg["states"] = tuple(cfg["states"])
        if "self_coefs" in cfg:
            cfg["self_coefs"] = tuple(cfg["self_coefs"])
        return cls(**cfg)


def generate_ar_process(
    config: ARProcessConfig, graph: AdjacencyGraph, seed: int
) -> ObservationTable:
    """AR-mode table; neighbor trend indicators feed each state's dynamics."""
    states = tuple(config.states)
    _validate_common(states, config.n_seasons, config.floor)
    _validate_visits({s: config.total_visits for s in states})
    if len(config.self_coefs) != 3:
        raise ConfigError("self_coefs must have three entries")
    if sum(abs(b) for b in config.self_coefs) >= 1.0:
        raise ConfigError("self_coefs must be stable (sum of |b| < 1)")
    if config.noise_sd < 0 or config.eps <= 0:
        raise ConfigError("noise_sd must be >= 0 and eps > 0")
    neighbor_sets = {s: graph.neighbors(s) for s in states}
    for s, nbrs in neighbor_sets.items():
        outside = set(nbrs) - set(states)
        if outside:
            raise ConfigError(
                f"{s} has covariate neighbors outside the generated set: {sorted(outside)}"
            )

    def template(week: Epiweek) -> float:
        pos = _season_position(week)
        if pos is None:
            return config.baseline
        z = (pos - config.peak_position) / config.peak_width
        return config.baseline + config.amplitude * exp(-0.5 * z * z)

    weeks = _span(config.start_year, config.n_seasons)
    means = [template(w) for w in weeks]
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((len(states), len(weeks)))

    values = np.zeros((len(states), len(weeks)))
    for j, week in enumerate(weeks):
        for i, state in enumerate(states):
            if j < 4:
                value = means[j] + config.noise_sd * noise[i, j]
            else:
                ar = sum(
                    b * (values[i, j - 2 - k] - means[j - 2 - k])
                    for k, b in enumerate(config.self_coefs)
                )
                trend = 0.0
                for nbr in neighbor_sets[state]:
                    ni = states.index(nbr)
                    for k in (0, 1):
                        trend += trend_indicator(
                            values[ni, j - 3 - k], values[ni, j - 2 - k], config.eps
                        )
                value = (
                    means[j]
                    + ar
                    + config.neighbor_coef * trend
                    + config.noise_sd * noise[i, j]
                )
            values[i, j] = min(max(value, config.floor), 100.0)

    rows_by_week: dict[Epiweek, list[Observation]] = {w: [] for w in weeks}
    for i, state in enumerate(states):
        for j, week in enumerate(weeks):
            rows_by_week[week].append(
                _make_observation(
                    state, week, values[i, j], config.total_visits, config.providers
                )
            )
    rows = [o for group in rows_by_week.values() for o in group]
    if config.include_national:
        rows.extend(_national_rows(rows_by_week))
    return ObservationTable(tuple(rows))
