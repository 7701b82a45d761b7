"""MMWR calendar arithmetic, season labels, and the in-season mask."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flucaster.epiweek import (
    Epiweek,
    in_season,
    season_of,
    season_weeks,
    seasons_between,
    week_range,
    weeks_in_year,
)
from flucaster.errors import DomainError

TRAIN_SEASONS = ["2010-11", "2011-12", "2012-13", "2013-14", "2014-15"]
TEST_SEASONS = ["2015-16", "2016-17", "2017-18", "2018-19"]


def _weeks_in_year_oracle(year: int) -> int:
    # Independent 28-year-cycle rule used by surveillance tooling.
    return 53 if year % 28 in (4, 9, 15, 20, 26) else 52


def test_weeks_in_year_matches_cycle_oracle():
    for year in range(1990, 2100):
        assert weeks_in_year(year) == _weeks_in_year_oracle(year), year


def test_week53_only_in_53_week_years():
    assert Epiweek(2014, 53).week == 53
    with pytest.raises(DomainError):
        Epiweek(2015, 53)
    with pytest.raises(DomainError):
        Epiweek(2014, 54)
    with pytest.raises(DomainError):
        Epiweek(2014, 0)


def test_successor_rolls_over_year_boundary():
    assert Epiweek(2015, 52).add(1) == Epiweek(2016, 1)
    assert Epiweek(2014, 52).add(1) == Epiweek(2014, 53)
    assert Epiweek(2014, 53).add(1) == Epiweek(2015, 1)


def test_ordering_is_calendar_order():
    assert Epiweek(2014, 53) < Epiweek(2015, 1)
    assert Epiweek(2014, 40) < Epiweek(2014, 53)
    assert Epiweek(2010, 40) < Epiweek(2011, 1)


@given(
    start=st.integers(min_value=2000, max_value=2030),
    week=st.integers(min_value=1, max_value=52),
    n=st.integers(min_value=-300, max_value=300),
)
@settings(max_examples=200, deadline=None)
def test_add_diff_round_trip(start, week, n):
    w = Epiweek(start, week)
    assert w.add(n).diff(w) == n
    assert w.add(n).add(-n) == w


def test_in_season_examples():
    assert in_season(Epiweek(2014, 53))
    assert not in_season(Epiweek(2015, 19))
    assert in_season(Epiweek(2012, 40))
    assert in_season(Epiweek(2015, 18))
    assert not in_season(Epiweek(2015, 39))


def test_season_of_examples():
    assert season_of(Epiweek(2014, 40)) == "2014-15"
    assert season_of(Epiweek(2015, 18)) == "2014-15"
    assert season_of(Epiweek(2014, 53)) == "2014-15"
    with pytest.raises(DomainError):
        season_of(Epiweek(2015, 25))


def test_training_span_has_156_in_season_weeks():
    # Only with week 53 in-season do the five training seasons hold 156 weeks.
    assert sum(len(season_weeks(s)) for s in TRAIN_SEASONS) == 156


def test_test_span_has_124_in_season_weeks():
    assert sum(len(season_weeks(s)) for s in TEST_SEASONS) == 124


def test_in_season_partitions_year_into_two_arcs():
    for year in range(2005, 2030):
        weeks = [Epiweek(year, w) for w in range(1, weeks_in_year(year) + 1)]
        flags = [in_season(w) for w in weeks]
        # transitions True->False and False->True each happen exactly once
        transitions = sum(1 for a, b in zip(flags, flags[1:]) if a != b)
        assert transitions == 2
        assert flags[0] and flags[-1] and not flags[25]


def test_season_weeks_chronological_and_labeled():
    weeks = season_weeks("2014-15")
    assert len(weeks) == 32  # 2014 has an MMWR week 53
    assert weeks == sorted(weeks)
    assert all(season_of(w) == "2014-15" for w in weeks)
    assert len(season_weeks("2015-16")) == 31


def test_seasons_between():
    assert seasons_between("2010-11", "2014-15") == TRAIN_SEASONS
    with pytest.raises(DomainError):
        seasons_between("2014-15", "2010-11")
    with pytest.raises(DomainError):
        season_weeks("2014-2015")


def test_parse_round_trip():
    w = Epiweek(2015, 4)
    assert str(w) == "2015w04"
    assert Epiweek.parse(str(w)) == w
    assert Epiweek.parse("2014w53") == Epiweek(2014, 53)
    with pytest.raises(DomainError):
        Epiweek.parse("2014-53")


def test_week_range_inclusive():
    weeks = list(week_range(Epiweek(2014, 51), Epiweek(2015, 2)))
    assert [str(w) for w in weeks] == ["2014w51", "2014w52", "2014w53", "2015w01", "2015w02"]
