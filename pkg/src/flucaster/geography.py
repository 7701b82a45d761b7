"""State adjacency: covariate-neighbor sets on the US border graph.

The packaged adjacency file lists directed (target, neighbor) pairs. Land and
river borders between the 48 contiguous states appear in both directions;
corner-touch pairs (AZ-CO, NM-UT) are included. Alaska and Hawaii carry
directed-only edges (AK takes WA; HI takes CA, OR, WA) so the mainland states
do not see them as covariates unless the graph is symmetrized.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DomainError, IntegrityError

STATE_CODES = frozenset(
    {
        "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA",
        "HI", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD",
        "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ",
        "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC",
        "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
    }
)

STATE_NAMES = {
    "AL": "Alabama", "AK": "Alaska", "AZ": "Arizona", "AR": "Arkansas",
    "CA": "California", "CO": "Colorado", "CT": "Connecticut", "DE": "Delaware",
    "FL": "Florida", "GA": "Georgia", "HI": "Hawaii", "ID": "Idaho",
    "IL": "Illinois", "IN": "Indiana", "IA": "Iowa", "KS": "Kansas",
    "KY": "Kentucky", "LA": "Louisiana", "ME": "Maine", "MD": "Maryland",
    "MA": "Massachusetts", "MI": "Michigan", "MN": "Minnesota", "MS": "Mississippi",
    "MO": "Missouri", "MT": "Montana", "NE": "Nebraska", "NV": "Nevada",
    "NH": "New Hampshire", "NJ": "New Jersey", "NM": "New Mexico", "NY": "New York",
    "NC": "North Carolina", "ND": "North Dakota", "OH": "Ohio", "OK": "Oklahoma",
    "OR": "Oregon", "PA": "Pennsylvania", "RI": "Rhode Island", "SC": "South Carolina",
    "SD": "South Dakota", "TN": "Tennessee", "TX": "Texas", "UT": "Utah",
    "VT": "Vermont", "VA": "Virginia", "WA": "Washington", "WV": "West Virginia",
    "WI": "Wisconsin", "WY": "Wyoming",
}

NATIONAL = "US"

# Island/exclave conventions are directed by default: only these targets gain
# the listed covariates.
ISLAND_EDGES = (("AK", "WA"), ("HI", "CA"), ("HI", "OR"), ("HI", "WA"))

_MAINLAND = STATE_CODES - {"AK", "HI"}


@dataclass(frozen=True)
class AdjacencyGraph:
    """Directed map target state -> alphabetically ordered covariate states."""

    edges: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for target, nbrs in self.edges.items():
            if target not in STATE_CODES:
                raise DomainError(f"unknown state code {target!r} in adjacency")
            for n in nbrs:
                if n not in STATE_CODES:
                    raise DomainError(f"unknown state code {n!r} in adjacency")
                if n == target:
                    raise IntegrityError(f"self-loop on {target}")
            if list(nbrs) != sorted(set(nbrs)):
                raise IntegrityError(f"neighbors of {target} not sorted/unique")

    def neighbors(self, state: str) -> tuple[str, ...]:
        """Covariate set S(state), alphabetically ordered and stable across runs."""
        if state not in self.edges:
            if state not in STATE_CODES:
                raise DomainError(f"unknown state code {state!r}")
            return ()
        return self.edges[state]

    def states(self) -> tuple[str, ...]:
        return tuple(sorted(self.edges))

    def symmetrized(self) -> "AdjacencyGraph":
        """Graph with every edge mirrored (gives WA/CA/OR the island states back)."""
        sym: dict[str, set[str]] = {s: set(n) for s, n in self.edges.items()}
        for target, nbrs in self.edges.items():
            for n in nbrs:
                sym.setdefault(n, set()).add(target)
        return AdjacencyGraph({s: tuple(sorted(n)) for s, n in sym.items()})

    def induced_subgraph(self, states: list[str] | tuple[str, ...]) -> "AdjacencyGraph":
        """Restriction to `states`; every retained state must keep >= 1 neighbor."""
        keep = set(states)
        unknown = keep - STATE_CODES
        if unknown:
            raise DomainError(f"unknown state codes {sorted(unknown)}")
        edges = {
            s: tuple(n for n in self.neighbors(s) if n in keep)
            for s in sorted(keep)
        }
        isolated = [s for s, n in edges.items() if not n]
        if isolated:
            raise IntegrityError(
                f"induced subgraph leaves states without neighbors: {isolated}"
            )
        return AdjacencyGraph(edges)

    def check_mainland_symmetry(self) -> None:
        """Raise unless all mainland pairs are mutual."""
        for a, nbrs in self.edges.items():
            if a not in _MAINLAND:
                continue
            for b in nbrs:
                if b in _MAINLAND and a not in self.neighbors(b):
                    raise IntegrityError(f"asymmetric mainland pair {a}->{b}")


def default_adjacency_path() -> Path:
    return Path(str(resources.files("flucaster").joinpath("data/us_state_adjacency.csv")))


def load_adjacency(path: str | Path | None = None, *, symmetrize: bool = False) -> AdjacencyGraph:
    """Load a (target, neighbor) CSV; defaults to the packaged US border file."""
    src = Path(path) if path is not None else default_adjacency_path()
    edges: dict[str, set[str]] = {}
    with open(src, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or {"target", "neighbor"} - set(reader.fieldnames):
            raise IntegrityError(f"{src}: expected header 'target,neighbor'")
        for row in reader:
            edges.setdefault(row["target"].strip(), set()).add(row["neighbor"].strip())
    graph = AdjacencyGraph({s: tuple(sorted(n)) for s, n in edges.items()})
    return graph.symmetrized() if symmetrize else graph


def save_adjacency(graph: AdjacencyGraph, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["target", "neighbor"])
        for target in graph.states():
            for n in graph.neighbors(target):
                writer.writerow([target, n])
