"""Weekly ILI surveillance tables: parsing, validation, serialization, audits.

Ingestion is file-based CSV with a configurable column mapping (semantic field
-> column name). Rows that violate row-level invariants are collected in a
reject report rather than silently dropped; duplicate (location, week) keys
abort the parse. The percentage/count consistency check (|ili_pct - 100*C/V|
within rounding tolerance) is applied at parse time so that a schema mapped to
a weighted-%ILI column can opt out explicitly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .epiweek import Epiweek, in_season, season_of
from .errors import (
    DomainError,
    InsufficientDataError,
    IntegrityError,
    SchemaError,
)
from .geography import NATIONAL, STATE_CODES, STATE_NAMES

SEMANTIC_FIELDS = ("location", "year", "week", "ili_pct", "ili_count", "total_visits", "providers")

# |ili_pct - 100*C/V| tolerance: published percentages are rounded.
CONSISTENCY_TOL = 0.05

_NAME_TO_CODE = {name.upper(): code for code, name in STATE_NAMES.items()}
_NATIONAL_ALIASES = {"US", "NAT", "NATIONAL", "X", "UNITED STATES"}


@dataclass(frozen=True, order=True)
class Observation:
    """One location-week surveillance record."""

    location: str
    week: Epiweek
    ili_pct: float
    ili_count: int
    total_visits: int
    providers: int

    def __post_init__(self) -> None:
        if self.ili_pct < 0:
            raise ValueError(f"{self.location} {self.week}: ili_pct < 0")
        if min(self.ili_count, self.total_visits, self.providers) < 0:
            raise ValueError(f"{self.location} {self.week}: negative count")
        if self.ili_count > self.total_visits:
            raise ValueError(
                f"{self.location} {self.week}: ili_count {self.ili_count} "
                f"> total_visits {self.total_visits}"
            )

    def consistency_gap(self) -> float:
        """|ili_pct - 100*C/V|, or 0.0 when no visits were reported."""
        if self.total_visits == 0:
            return 0.0
        return abs(self.ili_pct - 100.0 * self.ili_count / self.total_visits)


@dataclass(frozen=True)
class ObservationTable:
    """Immutable indexed collection of observations, one row per (location, week)."""

    rows: tuple[Observation, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.rows, key=lambda o: (o.location, o.week)))
        object.__setattr__(self, "rows", ordered)
        index: dict[tuple[str, Epiweek], Observation] = {}
        for obs in ordered:
            key = (obs.location, obs.week)
            if key in index:
                raise IntegrityError(f"duplicate observation for {key[0]} {key[1]}")
            index[key] = obs
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, location: str, week: Epiweek) -> Observation | None:
        return self._index.get((location, week))

    def ili(self, location: str, week: Epiweek) -> float | None:
        obs = self._index.get((location, week))
        return None if obs is None else obs.ili_pct

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(sorted({o.location for o in self.rows}))

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(s for s in self.locations if s != NATIONAL)

    @property
    def weeks(self) -> tuple[Epiweek, ...]:
        return tuple(sorted({o.week for o in self.rows}))

    @property
    def season_labels(self) -> dict[Epiweek, str]:
        """Season id for every in-season week present in the table."""
        return {w: season_of(w) for w in self.weeks if in_season(w)}

    def incomplete_weeks(self, expected: Iterable[str] | None = None) -> dict[Epiweek, tuple[str, ...]]:
        """Weeks missing any expected location (default: the table's own universe)."""
        universe = tuple(sorted(expected)) if expected is not None else self.locations
        gaps: dict[Epiweek, tuple[str, ...]] = {}
        for w in self.weeks:
            missing = tuple(s for s in universe if (s, w) not in self._index)
            if missing:
                gaps[w] = missing
        return gaps


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str
    raw: str


@dataclass(frozen=True)
class ParseResult:
    table: ObservationTable
    rejects: tuple[RejectedRow, ...]


def default_schema() -> dict[str, str]:
    return {f: f for f in SEMANTIC_FIELDS}


def load_schema(path: str | Path) -> dict[str, str]:
    """Read a JSON column-mapping file (semantic field -> column name)."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: schema must be a JSON object")
    schema = default_schema()
    unknown = set(raw) - set(SEMANTIC_FIELDS)
    if unknown:
        raise SchemaError(f"{path}: unknown schema keys {sorted(unknown)}")
    schema.update({k: str(v) for k, v in raw.items()})
    return schema


def normalize_location(value: str) -> str | None:
    """Map a location cell to a state code or the national marker; None if unknown."""
    text = value.strip().upper()
    if text in STATE_CODES:
        return text
    if text in _NATIONAL_ALIASES:
        return NATIONAL
    return _NAME_TO_CODE.get(text)


def parse_ili_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    *,
    check_consistency: bool = True,
    consistency_tol: float = CONSISTENCY_TOL,
) -> ParseResult:
    """Parse a weekly ILI CSV into an indexed table plus a reject report.

    Raises SchemaError when a mapped column is absent from the header and
    IntegrityError on a duplicate (location, week) key. All other problems
    reject the individual row with a reason.
    """
    colmap = dict(schema) if schema is not None else default_schema()
    missing_keys = set(SEMANTIC_FIELDS) - set(colmap)
    if missing_keys:
        raise SchemaError(f"schema missing fields {sorted(missing_keys)}")

    rows: list[Observation] = []
    rejects: list[RejectedRow] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        absent = [colmap[k] for k in SEMANTIC_FIELDS if colmap[k] not in header]
        if absent:
            raise SchemaError(f"{path}: missing required columns {absent}")
        for lineno, record in enumerate(reader, start=2):
            raw = ",".join("" if v is None else str(v) for v in record.values())
            try:
                rows.append(_parse_row(record, colmap))
            except (ValueError, DomainError) as exc:
                rejects.append(RejectedRow(lineno, str(exc), raw))
                continue
            if check_consistency:
                gap = rows[-1].consistency_gap()
                if gap > consistency_tol:
                    obs = rows.pop()
                    rejects.append(
                        RejectedRow(
                            lineno,
                            f"{obs.location} {obs.week}: ili_pct inconsistent with "
                            f"counts (gap {gap:.4f} > {consistency_tol})",
                            raw,
                        )
                    )
    return ParseResult(ObservationTable(tuple(rows)), tuple(rejects))


def _parse_row(record: Mapping[str, str], colmap: Mapping[str, str]) -> Observation:
    def cell(fieldname: str) -> str:
        value = record.get(colmap[fieldname])
        if value is None or str(value).strip() == "":
            raise ValueError(f"missing value for {fieldname}")
        return str(value).strip()

    location = normalize_location(cell("location"))
    if location is None:
        raise ValueError(f"unrecognized location {cell('location')!r}")
    week = Epiweek(int(cell("year")), int(cell("week")))
    return Observation(
        location=location,
        week=week,
        ili_pct=float(cell("ili_pct")),
        ili_count=_parse_count(cell("ili_count"), "ili_count"),
        total_visits=_parse_count(cell("total_visits"), "total_visits"),
        providers=_parse_count(cell("providers"), "providers"),
    )


def _parse_count(text: str, name: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"{name} not an integer: {text!r}")
    return int(value)


def write_ili_csv(table: ObservationTable, path: str | Path) -> None:
    """Canonical serialization; floats use repr so parse round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SEMANTIC_FIELDS)
        for obs in table.rows:
            writer.writerow(
                [
                    obs.location,
                    obs.week.year,
                    obs.week.week,
                    repr(obs.ili_pct),
                    obs.ili_count,
                    obs.total_visits,
                    obs.providers,
                ]
            )


@dataclass(frozen=True)
class NationalSeries:
    """Per-week national %ILI; synthesized=True when computed as a weighted mean."""

    values: dict[Epiweek, float]
    synthesized: bool


def us_average_series(table: ObservationTable) -> NationalSeries:
    """National series verbatim when present, else the visits-weighted state mean.

    The fallback requires every state in the table's universe to report at a
    week for that week to be usable; weeks with gaps raise rather than return
    a silently biased mean.
    """
    national = {o.week: o.ili_pct for o in table.rows if o.location == NATIONAL}
    if national:
        return NationalSeries(national, synthesized=False)
    states = table.states
    if not states:
        raise InsufficientDataError("table holds no state rows")
    values: dict[Epiweek, float] = {}
    for week in table.weeks:
        obs = [table.get(s, week) for s in states]
        if any(o is None for o in obs):
            missing = [s for s, o in zip(states, obs) if o is None]
            raise InsufficientDataError(
                f"no national rows and week {week} missing states {missing}"
            )
        visits = sum(o.total_visits for o in obs)
        if visits == 0:
            raise InsufficientDataError(f"week {week}: zero total visits")
        values[week] = 100.0 * sum(o.ili_count for o in obs) / visits
    return NationalSeries(values, synthesized=True)


@dataclass(frozen=True)
class SeasonAudit:
    season: str
    expected_weeks: int
    weeks_present_per_state: dict[str, int]


@dataclass(frozen=True)
class AuditReport:
    """In-season week counts per season and per state, for train/test spans."""

    train: tuple[SeasonAudit, ...]
    test: tuple[SeasonAudit, ...]
    train_weeks_expected: int
    test_weeks_expected: int
    train_weeks_per_state: dict[str, int]
    test_weeks_per_state: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "train_weeks_expected": self.train_weeks_expected,
            "test_weeks_expected": self.test_weeks_expected,
            "train_weeks_per_state": dict(sorted(self.train_weeks_per_state.items())),
            "test_weeks_per_state": dict(sorted(self.test_weeks_per_state.items())),
            "seasons": {
                "train": [
                    {
                        "season": a.season,
                        "expected_weeks": a.expected_weeks,
                        "weeks_present_per_state": dict(sorted(a.weeks_present_per_state.items())),
                    }
                    for a in self.train
                ],
                "test": [
                    {
                        "season": a.season,
                        "expected_weeks": a.expected_weeks,
                        "weeks_present_per_state": dict(sorted(a.weeks_present_per_state.items())),
                    }
                    for a in self.test
                ],
            },
        }


def audit_seasons(
    table: ObservationTable,
    train_seasons: Iterable[str],
    test_seasons: Iterable[str],
) -> AuditReport:
    """Count in-season weeks per state over the training and test season lists."""
    from .epiweek import season_weeks

    states = table.states

    def audit(season: str) -> SeasonAudit:
        weeks = season_weeks(season)
        per_state = {
            s: sum(1 for w in weeks if table.get(s, w) is not None) for s in states
        }
        return SeasonAudit(season, len(weeks), per_state)

    train = tuple(audit(s) for s in train_seasons)
    test = tuple(audit(s) for s in test_seasons)

    def totals(audits: tuple[SeasonAudit, ...]) -> dict[str, int]:
        out = {s: 0 for s in states}
        for a in audits:
            for s, n in a.weeks_present_per_state.items():
                out[s] += n
        return out

    return AuditReport(
        train=train,
        test=test,
        train_weeks_expected=sum(a.expected_weeks for a in train),
        test_weeks_expected=sum(a.expected_weeks for a in test),
        train_weeks_per_state=totals(train),
        test_weeks_per_state=totals(test),
    )
