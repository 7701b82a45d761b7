"""MMWR epiweek calendar: week arithmetic, season labels, and the in-season mask.

MMWR weeks run Sunday through Saturday. Week 1 of a year is the first week
containing at least four days of January, i.e. the week whose Sunday falls in
the range Dec 29 .. Jan 4. Most years have 52 weeks; years whose week-1
anchors are 371 days apart have 53 (e.g. 2014).

A flu season spans weeks 40..52/53 of its first year and weeks 1..18 of its
second, labeled "2014-15". Weeks 19..39 are off-season.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .errors import DomainError

SEASON_FIRST_WEEK = 40
SEASON_LAST_WEEK = 18

_SEASON_RE = re.compile(r"^(\d{4})-(\d{2})$")
_WEEK_RE = re.compile(r"^(\d{4})w(\d{1,2})$")


def _week1_sunday(year: int) -> dt.date:
    """Sunday starting MMWR week 1: the Sunday on or before January 4."""
    jan4 = dt.date(year, 1, 4)
    return jan4 - dt.timedelta(days=(jan4.weekday() + 1) % 7)


@lru_cache(maxsize=None)
def weeks_in_year(year: int) -> int:
    """Number of MMWR weeks (52 or 53) in a calendar year."""
    if not 1900 <= year <= 2199:
        raise DomainError(f"year {year} outside supported MMWR range")
    return (_week1_sunday(year + 1) - _week1_sunday(year)).days // 7


@dataclass(frozen=True, order=True)
class Epiweek:
    """An MMWR (year, week) pair, totally ordered by calendar time."""

    year: int
    week: int

    def __post_init__(self) -> None:
        if not 1 <= self.week <= weeks_in_year(self.year):
            raise DomainError(
                f"week {self.week} invalid for MMWR year {self.year} "
                f"({weeks_in_year(self.year)} weeks)"
            )

    def __str__(self) -> str:
        return f"{self.year}w{self.week:02d}"

    @classmethod
    def parse(cls, text: str) -> "Epiweek":
        """Parse the canonical "YYYYwWW" form."""
        m = _WEEK_RE.match(text.strip())
        if not m:
            raise DomainError(f"cannot parse epiweek {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def start_date(self) -> dt.date:
        """Sunday on which this epiweek starts."""
        return _week1_sunday(self.year) + dt.timedelta(weeks=self.week - 1)

    def add(self, n: int) -> "Epiweek":
        """Epiweek n weeks later (or earlier for negative n)."""
        year, week = self.year, self.week + n
        while week > weeks_in_year(year):
            week -= weeks_in_year(year)
            year += 1
        while week < 1:
            year -= 1
            week += weeks_in_year(year)
        return Epiweek(year, week)

    def diff(self, other: "Epiweek") -> int:
        """Number of weeks from `other` to self (positive when self is later)."""
        return (self.start_date() - other.start_date()).days // 7


def week_range(start: Epiweek, end: Epiweek) -> Iterator[Epiweek]:
    """Yield epiweeks from start through end inclusive."""
    w = start
    while w <= end:
        yield w
        w = w.add(1)


def in_season(week: Epiweek) -> bool:
    """True for epiweeks 40..53 and 1..18; week 53, where it exists, is in-season."""
    return week.week >= SEASON_FIRST_WEEK or week.week <= SEASON_LAST_WEEK


def season_of(week: Epiweek) -> str:
    """Season label ("2014-15") containing an in-season week."""
    if not in_season(week):
        raise DomainError(f"{week} is off-season (weeks 19-39 have no season)")
    start = week.year if week.week >= SEASON_FIRST_WEEK else week.year - 1
    return season_label(start)


def season_label(start_year: int) -> str:
    return f"{start_year}-{(start_year + 1) % 100:02d}"


def season_start_year(season: str) -> int:
    """Start year of a "YYYY-YY" season label."""
    m = _SEASON_RE.match(season.strip())
    if not m or int(m.group(2)) != (int(m.group(1)) + 1) % 100:
        raise DomainError(f"cannot parse season label {season!r}")
    return int(m.group(1))


def season_weeks(season: str) -> list[Epiweek]:
    """All in-season epiweeks of a season, in chronological order.

    31 weeks for ordinary seasons, 32 when the first year has an MMWR week 53.
    """
    y = season_start_year(season)
    first_half = [Epiweek(y, w) for w in range(SEASON_FIRST_WEEK, weeks_in_year(y) + 1)]
    second_half = [Epiweek(y + 1, w) for w in range(1, SEASON_LAST_WEEK + 1)]
    return first_half + second_half


def seasons_between(first: str, last: str) -> list[str]:
    """Season labels from `first` through `last` inclusive."""
    a, b = season_start_year(first), season_start_year(last)
    if b < a:
        raise DomainError(f"season range reversed: {first} .. {last}")
    return [season_label(y) for y in range(a, b + 1)]
