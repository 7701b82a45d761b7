"""Design-matrix construction for the autoregressive model classes.

Forecasts are two weeks ahead: a row with outcome at week w is built from
covariates at the fit time t = w - 2. Self lags use %ILI at t, t-1, t-2.
Covariate states (neighbors, US average) enter through ternary trend
indicators of the change from t-k-1 to t-k for k in {0, 1}, thresholded at
tolerance eps on the raw scale for the linear and quantile classes and on the
log(. + c) scale for the Poisson class. Poisson rows additionally carry
log(c + total_visits) at w as a fixed offset and log(c + providers) at w as a
free regressor.

Covariate lags may fall on off-season weeks; only outcome weeks are required
to be in-season. Missing inputs exclude a training row or make a prediction
row unavailable; nothing is imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .data import NationalSeries, ObservationTable
from .epiweek import Epiweek, in_season, season_weeks
from .errors import ConfigError, ContractError, MissingInputError
from .geography import NATIONAL, AdjacencyGraph

DEFAULT_EPS = 0.05

MODEL_CLASSES = ("linear", "quantile", "poisson")
LVCF = "lvcf"
VARIANTS = ("isolated", "neighbors", "isolated_us", "neighbors_us", "geo_pooled")

SELF_LAGS = (0, 1, 2)
TREND_LAGS = (0, 1)

POOLED = "pooled"


@dataclass(frozen=True, order=True)
class ModelSpec:
    """(class, variant) identity; LVCF uses variant "baseline"."""

    model_class: str
    variant: str

    def __post_init__(self) -> None:
        if self.model_class == LVCF:
            if self.variant != "baseline":
                raise ConfigError("LVCF has the single variant 'baseline'")
        elif self.model_class not in MODEL_CLASSES:
            raise ConfigError(f"unknown model class {self.model_class!r}")
        elif self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")

    @property
    def key(self) -> str:
        return f"{self.model_class}/{self.variant}"

    @classmethod
    def from_key(cls, key: str) -> "ModelSpec":
        model_class, _, variant = key.partition("/")
        return cls(model_class, variant)

    @property
    def uses_neighbors(self) -> bool:
        return self.variant in ("neighbors", "neighbors_us")

    @property
    def uses_us(self) -> bool:
        return self.variant in ("isolated_us", "neighbors_us")

    @property
    def pooled(self) -> bool:
        return self.variant == "geo_pooled"


def trend_indicator(prev: float, curr: float, eps: float = DEFAULT_EPS) -> int:
    """Ternary change indicator: +1 rising, -1 falling, 0 when |curr-prev| <= eps.

    A difference exactly at the tolerance is flat; the comparison treats
    values within float rounding of eps as ties so that decimal boundary
    cases (e.g. 1.05 - 1.00 against eps = 0.05) land on the <= branch.
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if not (math.isfinite(prev) and math.isfinite(curr)):
        raise ConfigError("trend indicator inputs must be finite")
    delta = curr - prev
    if math.isclose(abs(delta), eps, rel_tol=1e-9, abs_tol=1e-12):
        return 0
    if delta > eps:
        return 1
    if delta < -eps:
        return -1
    return 0


def log_trend_indicator(prev: float, curr: float, eps: float, c: float) -> int:
    """Trend indicator on the log scale; the +c shift keeps zero %ILI admissible."""
    if prev < 0 or curr < 0:
        raise ConfigError("log trend indicator inputs must be nonnegative")
    if c <= 0:
        raise ConfigError("small constant must be positive")
    return trend_indicator(math.log(prev + c), math.log(curr + c), eps)


def small_constant(table: ObservationTable, train_seasons: Iterable[str]) -> float:
    """Half the minimum state %ILI over the in-season training span.

    Computed once from training data and frozen thereafter. Raises when the
    minimum is not strictly positive (the log transforms would be undefined).
    """
    values = [
        obs.ili_pct
        for season in train_seasons
        for week in season_weeks(season)
        for obs in [table.get(s, week) for s in table.states]
        if obs is not None
    ]
    if not values:
        raise ConfigError("no training observations to compute the small constant")
    c = 0.5 * min(values)
    if c <= 0:
        raise ConfigError(
            "training span contains zero %ILI; the log-scale small constant "
            "is undefined (use a positive floor in synthetic configs)"
        )
    return c


def column_layout(
    spec: ModelSpec, neighbors: tuple[str, ...], *, intercept: bool = True
) -> tuple[str, ...]:
    """Ordered design column names; a pure function of (class, variant, S(l)).

    Layout: self lags, neighbor trends (alphabetical by state, k=0 then k=1),
    US trends, log-providers (Poisson only), intercept last.
    """
    poisson = spec.model_class == "poisson"
    lag_prefix = "log_ili_lag" if poisson else "ili_lag"
    trend_prefix = "logtrend" if poisson else "trend"
    names = [f"{lag_prefix}{k}" for k in SELF_LAGS]
    if spec.uses_neighbors:
        if list(neighbors) != sorted(set(neighbors)):
            raise ContractError("neighbor list must be sorted and unique")
        for s in neighbors:
            names.extend(f"{trend_prefix}_{s}_k{k}" for k in TREND_LAGS)
    if spec.uses_us:
        names.extend(f"{trend_prefix}_{NATIONAL}_k{k}" for k in TREND_LAGS)
    if poisson:
        names.append("log_providers")
    if intercept:
        names.append("intercept")
    return tuple(names)


@dataclass(frozen=True)
class LayoutInfo:
    poisson: bool
    uses_us: bool
    neighbors: tuple[str, ...]
    intercept: bool


def parse_column_layout(names: tuple[str, ...]) -> LayoutInfo:
    """Recover the structural content of a layout from its column names."""
    poisson = names[0].startswith("log_ili_lag")
    neighbors = []
    uses_us = False
    for name in names:
        if name.startswith(("trend_", "logtrend_")):
            state = name.split("_")[1]
            if state == NATIONAL:
                uses_us = True
            elif state not in neighbors:
                neighbors.append(state)
    return LayoutInfo(
        poisson=poisson,
        uses_us=uses_us,
        neighbors=tuple(neighbors),
        intercept=names[-1] == "intercept",
    )


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked training rows for one (class, variant, target, fit time)."""

    spec: ModelSpec
    target: str  # state code, or "pooled" for the geo-pooled variant
    fit_week: Epiweek
    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    offsets: np.ndarray | None  # Poisson: log(c + V) at the outcome week
    outcome_visits: np.ndarray | None  # Poisson: V at the outcome week
    row_states: tuple[str, ...]
    outcome_weeks: tuple[Epiweek, ...]
    rank_warning: bool

    def __len__(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class PredictionRow:
    """Covariate row for one t+2 forecast, outcome absent."""

    spec: ModelSpec
    target: str
    fit_week: Epiweek
    target_week: Epiweek
    columns: tuple[str, ...]
    x: np.ndarray
    offset: float | None  # Poisson: log(c + V) at the target week
    outcome_visits: int | None  # Poisson: V at the target week


def _require_ili(table: ObservationTable, location: str, week: Epiweek) -> float:
    value = table.ili(location, week)
    if value is None:
        raise MissingInputError(f"missing %ILI for {location} at {week}")
    return value


def _us_value(us: NationalSeries | None, week: Epiweek) -> float:
    if us is None:
        raise ContractError("variant uses the US average but no national series given")
    value = us.values.get(week)
    if value is None:
        raise MissingInputError(f"missing US average at {week}")
    return value


def _features_at(
    spec: ModelSpec,
    state: str,
    t: Epiweek,
    table: ObservationTable,
    neighbors: tuple[str, ...],
    us: NationalSeries | None,
    eps: float,
    c: float | None,
) -> list[float]:
    """Covariate vector at fit time t, in column_layout order."""
    poisson = spec.model_class == "poisson"
    if poisson and c is None:
        raise ContractError("Poisson features need the small constant c")

    lag_values = [_require_ili(table, state, t.add(-k)) for k in SELF_LAGS]
    if poisson:
        x = [math.log(lag_values[k] + c) for k in SELF_LAGS]
    else:
        x = [lag_values[k] for k in SELF_LAGS]

    def trends(series_at) -> list[float]:
        out = []
        for k in TREND_LAGS:
            curr, prev = series_at(t.add(-k)), series_at(t.add(-k - 1))
            if poisson:
                out.append(float(log_trend_indicator(prev, curr, eps, c)))
            else:
                out.append(float(trend_indicator(prev, curr, eps)))
        return out

    if spec.uses_neighbors:
        for s in neighbors:
            x.extend(trends(lambda w, s=s: _require_ili(table, s, w)))
    if spec.uses_us:
        x.extend(trends(lambda w: _us_value(us, w)))
    return x


def _poisson_outcome_terms(
    table: ObservationTable, state: str, w: Epiweek, c: float
) -> tuple[float, float, int, int]:
    """(log_providers regressor, offset, count outcome, visits) at outcome week w."""
    obs = table.get(state, w)
    if obs is None:
        raise MissingInputError(f"missing observation for {state} at {w}")
    return (
        math.log(obs.providers + c),
        math.log(obs.total_visits + c),
        obs.ili_count,
        obs.total_visits,
    )


def build_training_matrix(
    spec: ModelSpec,
    target: str,
    table: ObservationTable,
    graph: AdjacencyGraph,
    t: Epiweek,
    *,
    first_outcome: Epiweek,
    eps: float = DEFAULT_EPS,
    c: float | None = None,
    us: NationalSeries | None = None,
    intercept: bool = True,
) -> DesignMatrix:
    """All admissible training rows with in-season outcomes in [first_outcome, t].

    Rows referencing any missing lag, indicator input, or outcome are
    excluded. The geo-pooled variant stacks rows over every state in the
    table and ignores `target`.
    """
    poisson = spec.model_class == "poisson"
    states = list(table.states) if spec.pooled else [target]
    neighbors = () if spec.pooled else (graph.neighbors(target) if spec.uses_neighbors else ())
    columns = column_layout(spec, neighbors, intercept=intercept)

    rows: list[list[float]] = []
    outcomes: list[float] = []
    offsets: list[float] = []
    visits: list[int] = []
    row_states: list[str] = []
    outcome_weeks: list[Epiweek] = []

    week = first_outcome
    while week <= t:
        if in_season(week):
            t_prime = week.add(-2)
            for state in states:
                nbrs = () if spec.pooled else neighbors
                try:
                    x = _features_at(spec, state, t_prime, table, nbrs, us, eps, c)
                    if poisson:
                        log_p, offset, count, v = _poisson_outcome_terms(table, state, week, c)
                        x.append(log_p)
                        y_val = float(count)
                    else:
                        y_val = _require_ili(table, state, week)
                except MissingInputError:
                    continue
                if intercept:
                    x.append(1.0)
                rows.append(x)
                outcomes.append(y_val)
                row_states.append(state)
                outcome_weeks.append(week)
                if poisson:
                    offsets.append(offset)
                    visits.append(v)
        week = week.add(1)

    X = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    return DesignMatrix(
        spec=spec,
        target=POOLED if spec.pooled else target,
        fit_week=t,
        columns=columns,
        X=X,
        y=np.array(outcomes, dtype=float),
        offsets=np.array(offsets, dtype=float) if poisson else None,
        outcome_visits=np.array(visits, dtype=int) if poisson else None,
        row_states=tuple(row_states),
        outcome_weeks=tuple(outcome_weeks),
        rank_warning=len(rows) < len(columns),
    )


def build_prediction_row(
    spec: ModelSpec,
    target: str,
    table: ObservationTable,
    graph: AdjacencyGraph,
    t: Epiweek,
    *,
    eps: float = DEFAULT_EPS,
    c: float | None = None,
    us: NationalSeries | None = None,
    intercept: bool = True,
) -> PredictionRow:
    """Covariate row for forecasting target at t+2.

    Raises MissingInputError when any covariate (or, for Poisson, the
    outcome-week offset inputs) is absent; the caller records the forecast
    as unavailable with the reason.
    """
    poisson = spec.model_class == "poisson"
    neighbors = () if spec.pooled else (graph.neighbors(target) if spec.uses_neighbors else ())
    columns = column_layout(spec, neighbors, intercept=intercept)
    target_week = t.add(2)

    x = _features_at(spec, target, t, table, neighbors, us, eps, c)
    offset = None
    outcome_visits = None
    if poisson:
        log_p, offset, _, outcome_visits = _poisson_outcome_terms(table, target, target_week, c)
        x.append(log_p)
    if intercept:
        x.append(1.0)
    return PredictionRow(
        spec=spec,
        target=target,
        fit_week=t,
        target_week=target_week,
        columns=columns,
        x=np.array(x, dtype=float),
        offset=offset,
        outcome_visits=outcome_visits,
    )
