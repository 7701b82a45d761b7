"""Shared fixtures: small synthetic tables and the induced test-cluster graph."""

from __future__ import annotations

import pytest

from flucaster.geography import load_adjacency
from flucaster.synthetic import NORTHEAST_CLUSTER, SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def cluster_graph():
    return load_adjacency().induced_subgraph(list(NORTHEAST_CLUSTER))


@pytest.fixture(scope="session")
def small_table():
    """Three seasons of curve-mode data for the ten-state cluster."""
    return generate_synthetic(SyntheticConfig(n_seasons=3), seed=42)


@pytest.fixture(scope="session")
def tiny_table():
    """Two seasons, two states; fast enough for per-test fits."""
    config = SyntheticConfig(states=("MA", "NH", "VT"), n_seasons=2)
    return generate_synthetic(config, seed=7)
