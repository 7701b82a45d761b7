"""State-level ILI forecasting with spatial covariates and conformal intervals."""

from ._version import __version__  # noqa: F401

from .epiweek import Epiweek, in_season, season_of, season_weeks  # noqa: F401
from .data import (  # noqa: F401
    Observation,
    ObservationTable,
    audit_seasons,
    parse_ili_csv,
    us_average_series,
    write_ili_csv,
)
from .geography import AdjacencyGraph, load_adjacency  # noqa: F401
from .features import ModelSpec, build_prediction_row, build_training_matrix  # noqa: F401
from .regression import fit_model, lvcf_predict, predict  # noqa: F401
from .conformal import QuantileTracker, init_tracker  # noqa: F401
from .scoring import ForecastRecord, interval_score, score_forecasts, wis  # noqa: F401
from .runner import RunConfig, resume, run_backtest  # noqa: F401
from .synthetic import (  # noqa: F401
    ARProcessConfig,
    SyntheticConfig,
    generate_ar_process,
    generate_synthetic,
)
