"""Forecast scoring: interval scores, WIS, rMSE, and baseline comparisons.

The weighted interval score uses the three standard intervals (50/80/95%
coverage, miscoverage alpha in {0.50, 0.20, 0.05}) with weights alpha/2 and a
half-weighted median absolute error term, normalized by K + 1/2 = 3.5. All
scores are on the %ILI scale.

Aggregates (rMSE and mean WIS by state and by week) are plain functions of
the per-record scores, recomputable bit-for-bit from a persisted score table.
Unavailable forecasts are excluded from cells and surfaced through
availability counts, never penalized.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .data import ObservationTable
from .epiweek import Epiweek
from .errors import ContractError
from .features import ModelSpec

LEVELS = (0.50, 0.80, 0.95)


def interval_score(lower: float, upper: float, truth: float, alpha: float) -> float:
    """Width plus 2/alpha-scaled penalties for the truth escaping the interval."""
    if lower > upper:
        raise ContractError(f"interval reversed: [{lower}, {upper}]")
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"miscoverage alpha must lie in (0, 1), got {alpha}")
    score = upper - lower
    if truth < lower:
        score += (2.0 / alpha) * (lower - truth)
    if truth > upper:
        score += (2.0 / alpha) * (truth - upper)
    return score


@dataclass(frozen=True)
class ForecastRecord:
    """One t+2 forecast: point, median, three conformal intervals, and truth."""

    spec: ModelSpec
    state: str
    week: Epiweek
    season: str
    point: float | None
    median: float | None
    intervals: tuple[tuple[float, float, float], ...]  # (level, lower, upper)
    truth: float | None = None
    available: bool = True
    reason: str = ""

    def __post_init__(self) -> None:
        if self.available:
            levels = tuple(level for level, _, _ in self.intervals)
            if levels != LEVELS:
                raise ContractError(
                    f"available record must carry levels {LEVELS}, got {levels}"
                )
            for level, lo, hi in self.intervals:
                if lo > hi:
                    raise ContractError(f"interval at level {level} reversed")
            if self.point is None or self.median is None:
                raise ContractError("available record lacks point/median")

    def interval_at(self, level: float) -> tuple[float, float]:
        for lvl, lo, hi in self.intervals:
            if lvl == level:
                return lo, hi
        raise ContractError(f"record has no {level} interval")


def wis(record: ForecastRecord) -> float:
    """Weighted interval score of a complete record."""
    if not record.available or record.truth is None:
        raise ContractError("WIS needs an available record with truth filled")
    total = 0.5 * abs(record.truth - record.median)
    for level in LEVELS:
        alpha = round(1.0 - level, 10)
        lo, hi = record.interval_at(level)
        total += (alpha / 2.0) * interval_score(lo, hi, record.truth, alpha)
    return total / (len(LEVELS) + 0.5)


@dataclass(frozen=True)
class ScoredRecord:
    spec: ModelSpec
    state: str
    week: Epiweek
    season: str
    point: float
    median: float
    intervals: tuple[tuple[float, float, float], ...]
    truth: float
    sq_error: float
    wis: float

    def interval_at(self, level: float) -> tuple[float, float]:
        for lvl, lo, hi in self.intervals:
            if lvl == level:
                return lo, hi
        raise ContractError(f"record has no {level} interval")


@dataclass(frozen=True)
class ScoreTable:
    """Per-record scores plus rMSE/WIS aggregates keyed by (spec, state|week)."""

    records: tuple[ScoredRecord, ...]
    unavailable: tuple[ForecastRecord, ...]
    rmse_state: dict
    rmse_week: dict
    wis_state: dict
    wis_week: dict
    unavailable_state: dict
    unavailable_week: dict

    def specs(self) -> tuple[ModelSpec, ...]:
        return tuple(sorted({r.spec for r in self.records} | {r.spec for r in self.unavailable}))

    def cells(self, spec: ModelSpec) -> set[tuple[str, Epiweek]]:
        return {(r.state, r.week) for r in self.records if r.spec == spec}

    def rmse_by_state(self, spec: ModelSpec, state: str) -> float | None:
        return self.rmse_state.get((spec, state))

    def rmse_by_week(self, spec: ModelSpec, week: Epiweek) -> float | None:
        return self.rmse_week.get((spec, week))

    def wis_by_state(self, spec: ModelSpec, state: str) -> float | None:
        return self.wis_state.get((spec, state))

    def wis_by_week(self, spec: ModelSpec, week: Epiweek) -> float | None:
        return self.wis_week.get((spec, week))


def _aggregate(records: tuple[ScoredRecord, ...]):
    """Group scores by (spec, state) and (spec, week); order-stable means."""
    sq_state: dict = {}
    sq_week: dict = {}
    w_state: dict = {}
    w_week: dict = {}
    for r in sorted(records, key=lambda r: (r.spec, r.state, r.week)):
        sq_state.setdefault((r.spec, r.state), []).append(r.sq_error)
        sq_week.setdefault((r.spec, r.week), []).append(r.sq_error)
        w_state.setdefault((r.spec, r.state), []).append(r.wis)
        w_week.setdefault((r.spec, r.week), []).append(r.wis)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    return (
        {k: math.sqrt(mean(v)) for k, v in sq_state.items()},
        {k: math.sqrt(mean(v)) for k, v in sq_week.items()},
        {k: mean(v) for k, v in w_state.items()},
        {k: mean(v) for k, v in w_week.items()},
    )


def score_forecasts(
    forecasts: list[ForecastRecord] | tuple[ForecastRecord, ...],
    table: ObservationTable,
) -> ScoreTable:
    """Fill truths from the table, score every available record, aggregate."""
    scored: list[ScoredRecord] = []
    unavailable: list[ForecastRecord] = []
    for rec in forecasts:
        if not rec.available:
            unavailable.append(rec)
            continue
        truth = rec.truth if rec.truth is not None else table.ili(rec.state, rec.week)
        if truth is None:
            unavailable.append(
                ForecastRecord(
                    spec=rec.spec,
                    state=rec.state,
                    week=rec.week,
                    season=rec.season,
                    point=rec.point,
                    median=rec.median,
                    intervals=rec.intervals,
                    available=False,
                    reason=f"no realized %ILI for {rec.state} at {rec.week}",
                )
            )
            continue
        filled = ForecastRecord(
            spec=rec.spec,
            state=rec.state,
            week=rec.week,
            season=rec.season,
            point=rec.point,
            median=rec.median,
            intervals=rec.intervals,
            truth=truth,
        )
        scored.append(
            ScoredRecord(
                spec=filled.spec,
                state=filled.state,
                week=filled.week,
                season=filled.season,
                point=filled.point,
                median=filled.median,
                intervals=filled.intervals,
                truth=truth,
                sq_error=(filled.point - truth) ** 2,
                wis=wis(filled),
            )
        )

    records = tuple(sorted(scored, key=lambda r: (r.spec, r.state, r.week)))
    missing = tuple(sorted(unavailable, key=lambda r: (r.spec, r.state, r.week)))
    rmse_state, rmse_week, wis_state, wis_week = _aggregate(records)
    unavailable_state: dict = {}
    unavailable_week: dict = {}
    for r in missing:
        unavailable_state[(r.spec, r.state)] = unavailable_state.get((r.spec, r.state), 0) + 1
        unavailable_week[(r.spec, r.week)] = unavailable_week.get((r.spec, r.week), 0) + 1
    return ScoreTable(
        records=records,
        unavailable=missing,
        rmse_state=rmse_state,
        rmse_week=rmse_week,
        wis_state=wis_state,
        wis_week=wis_week,
        unavailable_state=unavailable_state,
        unavailable_week=unavailable_week,
    )


@dataclass(frozen=True)
class DiffTable:
    """Per-cell (spec - baseline) differences; negative means improvement."""

    spec: ModelSpec
    baseline: ModelSpec
    rmse_by_state: dict
    rmse_by_week: dict
    wis_by_state: dict
    wis_by_week: dict


def diff_vs_baseline(
    scores: ScoreTable, spec: ModelSpec, baseline: ModelSpec
) -> DiffTable:
    """Differences of aggregates against a baseline scored on identical cells."""
    cells_spec = scores.cells(spec)
    cells_base = scores.cells(baseline)
    if cells_spec != cells_base:
        missing = sorted(
            f"{s}@{w}" for s, w in cells_spec.symmetric_difference(cells_base)
        )
        raise ContractError(
            f"{spec.key} and {baseline.key} scored on different cells: {missing[:20]}"
            + ("..." if len(missing) > 20 else "")
        )
    states = sorted({s for s, _ in cells_spec})
    weeks = sorted({w for _, w in cells_spec})
    return DiffTable(
        spec=spec,
        baseline=baseline,
        rmse_by_state={
            s: scores.rmse_state[(spec, s)] - scores.rmse_state[(baseline, s)]
            for s in states
        },
        rmse_by_week={
            w: scores.rmse_week[(spec, w)] - scores.rmse_week[(baseline, w)]
            for w in weeks
        },
        wis_by_state={
            s: scores.wis_state[(spec, s)] - scores.wis_state[(baseline, s)]
            for s in states
        },
        wis_by_week={
            w: scores.wis_week[(spec, w)] - scores.wis_week[(baseline, w)]
            for w in weeks
        },
    )


def write_scores_csv(scores: ScoreTable, path: str | Path) -> None:
    """Tidy per-record scores; unavailable cells appear with empty score fields."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "class", "variant", "state", "week", "season", "point", "median",
                "lower_50", "upper_50", "lower_80", "upper_80", "lower_95", "upper_95",
                "truth", "sq_error", "wis", "available", "reason",
            ]
        )
        rows = [(r, True) for r in scores.records] + [(r, False) for r in scores.unavailable]
        rows.sort(key=lambda item: (item[0].spec, item[0].state, item[0].week))
        for rec, ok in rows:
            bounds = []
            if ok or rec.intervals:
                for level in LEVELS:
                    lo, hi = rec.interval_at(level)
                    bounds.extend([repr(lo), repr(hi)])
            else:
                bounds = [""] * 6
            writer.writerow(
                [
                    rec.spec.model_class,
                    rec.spec.variant,
                    rec.state,
                    str(rec.week),
                    rec.season,
                    repr(rec.point) if rec.point is not None else "",
                    repr(rec.median) if rec.median is not None else "",
                    *bounds,
                    repr(rec.truth) if ok else "",
                    repr(rec.sq_error) if ok else "",
                    repr(rec.wis) if ok else "",
                    int(ok),
                    "" if ok else rec.reason,
                ]
            )


def write_state_aggregates_csv(scores: ScoreTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "variant", "state", "rmse", "wis", "n_scored", "n_unavailable"])
        keys = sorted(scores.rmse_state)
        for spec, state in keys:
            n = sum(1 for r in scores.records if r.spec == spec and r.state == state)
            writer.writerow(
                [
                    spec.model_class,
                    spec.variant,
                    state,
                    repr(scores.rmse_state[(spec, state)]),
                    repr(scores.wis_state[(spec, state)]),
                    n,
                    scores.unavailable_state.get((spec, state), 0),
                ]
            )


def write_week_aggregates_csv(scores: ScoreTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "variant", "week", "rmse", "wis", "n_scored", "n_unavailable"])
        keys = sorted(scores.rmse_week)
        for spec, week in keys:
            n = sum(1 for r in scores.records if r.spec == spec and r.week == week)
            writer.writerow(
                [
                    spec.model_class,
                    spec.variant,
                    str(week),
                    repr(scores.rmse_week[(spec, week)]),
                    repr(scores.wis_week[(spec, week)]),
                    n,
                    scores.unavailable_week.get((spec, week), 0),
                ]
            )
