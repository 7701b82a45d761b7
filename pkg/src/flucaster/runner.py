"""Rolling-origin backtest orchestration.

For every in-season target week of the test seasons, every configured
(class, variant, state) model is refit on all admissible rows whose outcome
was observable at the fit time t = target - 2, produces a t+2 point forecast,
and wraps it in conformal intervals. Trackers consume realized scores in
chronological order with the two-week reporting delay: the score for target
week w is applied before forecasting any week whose fit time is >= w, never
earlier.

Runs are resumable: each completed cell is journaled to an append-only
forecast file plus a manifest of cell keys and content hashes, and tracker
warm starts are journaled when first computed. A resumed run replays the
journal and recomputes only missing cells, yielding outputs bit-identical to
an uninterrupted run. Everything is deterministic given config plus data.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .conformal import LEVELS, QuantileTracker, default_learning_rate, init_tracker
from .data import (
    NationalSeries,
    ObservationTable,
    default_schema,
    load_schema,
    parse_ili_csv,
    us_average_series,
)
from .epiweek import Epiweek, season_of, season_start_year, season_weeks
from .errors import (
    ConfigError,
    ContractError,
    FitError,
    InsufficientDataError,
    MissingInputError,
    ResumeError,
    RunError,
)
from .features import (
    LVCF,
    MODEL_CLASSES,
    VARIANTS,
    DesignMatrix,
    ModelSpec,
    build_prediction_row,
    build_training_matrix,
    small_constant,
)
from .geography import AdjacencyGraph, load_adjacency
from .regression import FittedModel, fit_model, in_sample_residuals, lvcf_predict, predict
from .scoring import (
    ForecastRecord,
    ScoreTable,
    score_forecasts,
    write_scores_csv,
    write_state_aggregates_csv,
    write_week_aggregates_csv,
)

_BASELINE_VARIANT = "baseline"


@dataclass(frozen=True)
class RunConfig:
    """Backtest settings; file paths are resolved by from_json."""

    data_path: str
    output_dir: str
    train_seasons: tuple[str, ...]
    test_seasons: tuple[str, ...]
    adjacency_path: str | None = None
    schema_path: str | None = None
    classes: tuple[str, ...] = ("linear", "quantile", "poisson", LVCF)
    variants: tuple[str, ...] = VARIANTS
    eps: float = 0.05
    learning_rate_scale: float = 0.1
    levels: tuple[float, ...] = LEVELS
    jobs: int = 1
    strict_paper_mode: bool = False
    symmetrize_borders: bool = False
    debug_dumps: bool = False

    def __post_init__(self) -> None:
        if not self.train_seasons or not self.test_seasons:
            raise ConfigError("train_seasons and test_seasons must be nonempty")
        last_train = max(season_start_year(s) for s in self.train_seasons)
        first_test = min(season_start_year(s) for s in self.test_seasons)
        if first_test <= last_train:
            raise ConfigError("test seasons must be strictly after train seasons")
        unknown = set(self.classes) - set(MODEL_CLASSES) - {LVCF}
        if unknown:
            raise ConfigError(f"unknown model classes {sorted(unknown)}")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ConfigError(f"unknown variants {sorted(unknown)}")
        if len(set(self.classes)) != len(self.classes) or not self.classes:
            raise ConfigError("classes must be nonempty and distinct")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("variants must be distinct")
        if tuple(self.levels) != LEVELS:
            raise ConfigError(f"interval levels must be {LEVELS}")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def model_specs(self) -> tuple[ModelSpec, ...]:
        specs = []
        for cls in sorted(self.classes):
            if cls == LVCF:
                specs.append(ModelSpec(LVCF, _BASELINE_VARIANT))
            else:
                specs.extend(ModelSpec(cls, v) for v in sorted(self.variants))
        return tuple(sorted(specs))

    def canonical_dict(self) -> dict:
        """Result-determining fields only; output_dir/jobs/dumps excluded."""
        return {
            "data_path": str(self.data_path),
            "adjacency_path": None if self.adjacency_path is None else str(self.adjacency_path),
            "schema_path": None if self.schema_path is None else str(self.schema_path),
            "train_seasons": list(self.train_seasons),
            "test_seasons": list(self.test_seasons),
            "classes": list(self.classes),
            "variants": list(self.variants),
            "eps": self.eps,
            "learning_rate_scale": self.learning_rate_scale,
            "levels": list(self.levels),
            "strict_paper_mode": self.strict_paper_mode,
            "symmetrize_borders": self.symmetrize_borders,
        }

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        base = Path(path).resolve().parent
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")

        def resolve(key: str) -> None:
            if raw.get(key) is not None:
                p = Path(raw[key])
                raw[key] = str(p if p.is_absolute() else base / p)

        for key in ("data_path", "adjacency_path", "schema_path", "output_dir"):
            resolve(key)
        for key in ("train_seasons", "test_seasons", "classes", "variants", "levels"):
            if key in raw:
                raw[key] = tuple(raw[key])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _record_to_json(rec: ForecastRecord) -> dict:
    return {
        "class": rec.spec.model_class,
        "variant": rec.spec.variant,
        "state": rec.state,
        "week": str(rec.week),
        "season": rec.season,
        "point": rec.point,
        "median": rec.median,
        "intervals": [[level, lo, hi] for level, lo, hi in rec.intervals],
        "available": rec.available,
        "reason": rec.reason,
    }


def _record_from_json(raw: dict) -> ForecastRecord:
    return ForecastRecord(
        spec=ModelSpec(raw["class"], raw["variant"]),
        state=raw["state"],
        week=Epiweek.parse(raw["week"]),
        season=raw["season"],
        point=raw["point"],
        median=raw["median"],
        intervals=tuple((lvl, lo, hi) for lvl, lo, hi in raw["intervals"]),
        available=raw["available"],
        reason=raw["reason"],
    )


def _cell_key(spec: ModelSpec, state: str, week: Epiweek) -> str:
    return f"{spec.key}|{state}|{week}"


@dataclass
class RunResult:
    config: RunConfig
    forecasts: tuple[ForecastRecord, ...]
    scores: ScoreTable
    output_dir: Path
    target_weeks: tuple[Epiweek, ...]


@dataclass
class _TaskResult:
    spec: ModelSpec
    state: str
    point: float | None = None
    reason: str = ""
    warm_residuals: np.ndarray | None = None
    model: FittedModel | None = None
    design: DesignMatrix | None = None


class _Journal:
    """Append-only persistence: forecasts, manifest, tracker warm starts."""

    def __init__(self, out: Path):
        self.out = out
        self.forecast_path = out / "forecasts.jsonl"
        self.manifest_path = out / "manifest.jsonl"
        self.tracker_path = out / "tracker_init.jsonl"

    def load(self) -> tuple[dict[str, ForecastRecord], dict[tuple[str, str], dict]]:
        records: dict[str, ForecastRecord] = {}
        if self.forecast_path.exists():
            for line in self.forecast_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    rec = _record_from_json(raw)
                except (json.JSONDecodeError, KeyError, ContractError) as exc:
                    raise ResumeError(f"corrupt forecast journal line: {exc}") from None
                records.setdefault(_cell_key(rec.spec, rec.state, rec.week), rec)
        completed: dict[str, ForecastRecord] = {}
        if self.manifest_path.exists():
            for line in self.manifest_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key, content_hash = entry["key"], entry["hash"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ResumeError(f"corrupt manifest line: {exc}") from None
                rec = records.get(key)
                if rec is None:
                    raise ResumeError(f"manifest references missing forecast {key}")
                if self._hash_record(rec) != content_hash:
                    raise ResumeError(f"manifest hash mismatch for {key}")
                completed[key] = rec
        warm: dict[tuple[str, str], dict] = {}
        if self.tracker_path.exists():
            for line in self.tracker_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    group = (entry["model"], entry["state"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ResumeError(f"corrupt tracker journal line: {exc}") from None
                warm.setdefault(group, entry)
        return completed, warm

    @staticmethod
    def _hash_record(rec: ForecastRecord) -> str:
        return hashlib.sha256(_canonical_json(_record_to_json(rec)).encode()).hexdigest()

    def append_record(self, rec: ForecastRecord) -> None:
        with open(self.forecast_path, "a", encoding="utf-8") as f:
            f.write(_canonical_json(_record_to_json(rec)) + "\n")
        with open(self.manifest_path, "a", encoding="utf-8") as f:
            f.write(
                _canonical_json(
                    {"key": _cell_key(rec.spec, rec.state, rec.week), "hash": self._hash_record(rec)}
                )
                + "\n"
            )

    def append_tracker(self, model_key: str, state: str, eta: float, radii: dict) -> None:
        with open(self.tracker_path, "a", encoding="utf-8") as f:
            f.write(
                _canonical_json(
                    {"model": model_key, "state": state, "eta": eta, "radii": radii}
                )
                + "\n"
            )


class _Engine:
    def __init__(self, config: RunConfig):
        self.cfg = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.journal = _Journal(self.out)

        schema = load_schema(config.schema_path) if config.schema_path else default_schema()
        result = parse_ili_csv(config.data_path, schema)
        self.table: ObservationTable = result.table
        if not self.table.rows:
            raise RunError(f"{config.data_path}: no usable rows")
        self.graph: AdjacencyGraph = load_adjacency(
            config.adjacency_path, symmetrize=config.symmetrize_borders
        )
        self.specs = config.model_specs
        self.states = self.table.states

        needs_us = any(s.uses_us for s in self.specs)
        self.us: NationalSeries | None = None
        if needs_us:
            try:
                self.us = us_average_series(self.table)
            except InsufficientDataError as exc:
                raise RunError(f"US-average variants requested but: {exc}") from None
        needs_c = any(s.model_class == "poisson" for s in self.specs)
        self.c: float | None = None
        if needs_c:
            self.c = small_constant(self.table, config.train_seasons)

        self.first_outcome = season_weeks(config.train_seasons[0])[0]
        self.target_weeks = tuple(
            w for season in config.test_seasons for w in season_weeks(season)
        )

        # Tracker state per (model key, state): warm-start params plus queue of
        # realized scores not yet applied.
        self.trackers: dict[tuple[str, str], dict[float, QuantileTracker]] = {}
        self.warm: dict[tuple[str, str], dict] = {}
        self.pending: dict[tuple[str, str], list[tuple[Epiweek, float]]] = {}
        self.records: dict[str, ForecastRecord] = {}

    # -- metadata ---------------------------------------------------------

    def metadata(self) -> dict:
        return {
            "artifact": "flucaster",
            "version": __version__,
            "config": self.cfg.canonical_dict(),
            "config_hash": hashlib.sha256(
                _canonical_json(self.cfg.canonical_dict()).encode()
            ).hexdigest(),
            "data_sha256": file_sha256(self.cfg.data_path),
            "adjacency_sha256": (
                file_sha256(self.cfg.adjacency_path) if self.cfg.adjacency_path else None
            ),
        }

    def write_metadata(self) -> None:
        path = self.out / "run_metadata.json"
        meta = self.metadata()
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            for key in ("config_hash", "data_sha256", "adjacency_sha256"):
                if existing.get(key) != meta[key]:
                    raise ResumeError(
                        f"run directory {self.out} was produced with different "
                        f"{key.replace('_sha256', ' contents').replace('_hash', '')}"
                    )
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    # -- tracker plumbing --------------------------------------------------

    def _intercept(self, spec: ModelSpec) -> bool:
        return not (self.cfg.strict_paper_mode and spec.variant == "isolated")

    def _materialize_trackers(self) -> None:
        """Rebuild tracker warm-start states loaded from the journal."""
        for group, entry in self.warm.items():
            eta = entry["eta"]
            self.trackers[group] = {
                level: QuantileTracker(
                    level=level, learning_rate=eta, radius=entry["radii"][str(level)]
                )
                for level in LEVELS
            }

    def _ensure_warm(self, spec: ModelSpec, state: str, residuals: np.ndarray) -> None:
        group = (spec.key, state)
        if group in self.trackers:
            return
        scores = np.abs(residuals)
        eta = default_learning_rate(scores, self.cfg.learning_rate_scale)
        self.trackers[group] = {
            level: init_tracker(scores, level, eta) for level in LEVELS
        }
        radii = {str(level): self.trackers[group][level].radius for level in LEVELS}
        self.warm[group] = {"model": spec.key, "state": state, "eta": eta, "radii": radii}
        self.journal.append_tracker(spec.key, state, eta, radii)

    def _apply_pending(self, spec: ModelSpec, state: str, fit_week: Epiweek) -> None:
        group = (spec.key, state)
        queue = self.pending.get(group)
        if not queue or group not in self.trackers:
            return
        ready = [item for item in queue if item[0] <= fit_week]
        if not ready:
            return
        self.pending[group] = [item for item in queue if item[0] > fit_week]
        for week, score in sorted(ready, key=lambda item: item[0]):
            before = {level: self.trackers[group][level].radius for level in LEVELS}
            self.trackers[group] = {
                level: tracker.update(score)
                for level, tracker in self.trackers[group].items()
            }
            if self.cfg.debug_dumps:
                self._dump_tracker_step(spec, state, week, score, before)

    def _queue_score(self, rec: ForecastRecord) -> None:
        if not rec.available:
            return
        truth = self.table.ili(rec.state, rec.week)
        if truth is None:
            return
        group = (rec.spec.key, rec.state)
        self.pending.setdefault(group, []).append((rec.week, abs(truth - rec.point)))

    # -- fitting -----------------------------------------------------------

    def _fit_task(self, spec: ModelSpec, state: str, t: Epiweek) -> _TaskResult:
        out = _TaskResult(spec=spec, state=state)
        try:
            if spec.model_class == LVCF:
                out.point = lvcf_predict(self.table, state, t)
                out.warm_residuals = self._lvcf_training_residuals(state)
                return out
            design = build_training_matrix(
                spec,
                state,
                self.table,
                self.graph,
                t,
                first_outcome=self.first_outcome,
                eps=self.cfg.eps,
                c=self.c,
                us=self.us,
                intercept=self._intercept(spec),
            )
            return self._predict_from_design(spec, state, t, design)
        except (MissingInputError, FitError) as exc:
            out.reason = str(exc)
            return out

    def _predict_from_design(
        self,
        spec: ModelSpec,
        state: str,
        t: Epiweek,
        design: DesignMatrix,
        model: FittedModel | None = None,
    ) -> _TaskResult:
        out = _TaskResult(spec=spec, state=state)
        try:
            if len(design) == 0:
                raise FitError("no admissible training rows")
            target_week = t.add(2)
            for outcome_week in design.outcome_weeks:
                if outcome_week >= target_week:
                    raise RunError(
                        f"leakage: training outcome {outcome_week} not before "
                        f"target {target_week} for {spec.key} {state}"
                    )
            if model is None:
                model = fit_model(design)
            row = build_prediction_row(
                spec,
                state,
                self.table,
                self.graph,
                t,
                eps=self.cfg.eps,
                c=self.c,
                us=self.us,
                intercept=self._intercept(spec),
            )
            out.point = predict(model, row)
            out.model = model
            out.design = design
            residuals = in_sample_residuals(model, design)
            if spec.pooled:
                mask = np.array([s == state for s in design.row_states])
                if residuals.shape[0] == mask.shape[0] and mask.any():
                    residuals = residuals[mask]
            out.warm_residuals = residuals
        except (MissingInputError, FitError) as exc:
            out.reason = str(exc)
        return out

    def _lvcf_training_residuals(self, state: str) -> np.ndarray:
        residuals = []
        for season in self.cfg.train_seasons:
            for week in season_weeks(season):
                truth = self.table.ili(state, week)
                lagged = self.table.ili(state, week.add(-2))
                if truth is not None and lagged is not None:
                    residuals.append(truth - lagged)
        if not residuals:
            raise FitError(f"no training residuals for LVCF warm start in {state}")
        return np.asarray(residuals)

    # -- main loop ---------------------------------------------------------

    def run(self) -> RunResult:
        self.write_metadata()
        completed, self.warm = self.journal.load()
        self.records = dict(completed)
        self._materialize_trackers()

        tasks = [(spec, state) for spec in self.specs for state in self.states]
        for week in self.target_weeks:
            t = week.add(-2)
            results = self._execute(tasks, t)
            for spec, state in sorted(results):
                res = results[(spec, state)]
                self._apply_pending(spec, state, t)
                key = _cell_key(spec, state, week)
                if key in self.records:
                    self._queue_score(self.records[key])
                    continue
                rec = self._finish_cell(res, week)
                self.records[key] = rec
                self.journal.append_record(rec)
                self._queue_score(rec)
                if self.cfg.debug_dumps and res.design is not None:
                    self._dump_design(res, week)
        return self._finalize()

    def _execute(
        self, tasks: list[tuple[ModelSpec, str]], t: Epiweek
    ) -> dict[tuple[ModelSpec, str], _TaskResult]:
        week = t.add(2)
        todo = [
            (spec, state)
            for spec, state in tasks
            if _cell_key(spec, state, week) not in self.records
        ]

        # Geo-pooled designs are shared across states: fit once per class.
        pooled_models: dict[str, tuple[DesignMatrix, FittedModel | None, str]] = {}
        for spec, _ in todo:
            if spec.pooled and spec.key not in pooled_models:
                design = build_training_matrix(
                    spec,
                    "pooled",
                    self.table,
                    self.graph,
                    t,
                    first_outcome=self.first_outcome,
                    eps=self.cfg.eps,
                    c=self.c,
                    us=self.us,
                    intercept=self._intercept(spec),
                )
                try:
                    if len(design) == 0:
                        raise FitError("no admissible training rows")
                    model = fit_model(design)
                    pooled_models[spec.key] = (design, model, "")
                except FitError as exc:
                    pooled_models[spec.key] = (design, None, str(exc))

        def compute(item: tuple[ModelSpec, str]) -> _TaskResult:
            spec, state = item
            if spec.pooled:
                design, model, reason = pooled_models[spec.key]
                if model is None:
                    return _TaskResult(spec=spec, state=state, reason=reason)
                return self._predict_from_design(spec, state, t, design, model=model)
            return self._fit_task(spec, state, t)

        results: dict[tuple[ModelSpec, str], _TaskResult] = {}
        if self.cfg.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
                for item, res in zip(todo, pool.map(compute, todo)):
                    results[item] = res
        else:
            for item in todo:
                results[item] = compute(item)
        for item in set(tasks) - set(todo):
            results[item] = _TaskResult(spec=item[0], state=item[1])
        return results

    def _finish_cell(self, res: _TaskResult, week: Epiweek) -> ForecastRecord:
        spec, state = res.spec, res.state
        season = season_of(week)
        if res.point is None:
            return ForecastRecord(
                spec=spec,
                state=state,
                week=week,
                season=season,
                point=None,
                median=None,
                intervals=(),
                available=False,
                reason=res.reason or "forecast unavailable",
            )
        if res.warm_residuals is not None:
            try:
                self._ensure_warm(spec, state, res.warm_residuals)
            except ConfigError as exc:
                return ForecastRecord(
                    spec=spec,
                    state=state,
                    week=week,
                    season=season,
                    point=None,
                    median=None,
                    intervals=(),
                    available=False,
                    reason=f"tracker warm start failed: {exc}",
                )
        group = (spec.key, state)
        if group not in self.trackers:
            return ForecastRecord(
                spec=spec,
                state=state,
                week=week,
                season=season,
                point=None,
                median=None,
                intervals=(),
                available=False,
                reason="trackers not initialized (no successful fit yet)",
            )
        intervals = tuple(
            (level, *self.trackers[group][level].interval(res.point)) for level in LEVELS
        )
        return ForecastRecord(
            spec=spec,
            state=state,
            week=week,
            season=season,
            point=res.point,
            median=res.point,
            intervals=intervals,
        )

    def _finalize(self) -> RunResult:
        ordered = tuple(
            self.records[key]
            for key in sorted(
                self.records,
                key=lambda k: (
                    self.records[k].spec,
                    self.records[k].state,
                    self.records[k].week,
                ),
            )
        )
        scores = score_forecasts(list(ordered), self.table)
        write_scores_csv(scores, self.out / "scores.csv")
        write_state_aggregates_csv(scores, self.out / "scores_by_state.csv")
        write_week_aggregates_csv(scores, self.out / "scores_by_week.csv")
        self._write_forecast_csv(ordered)
        return RunResult(
            config=self.cfg,
            forecasts=ordered,
            scores=scores,
            output_dir=self.out,
            target_weeks=self.target_weeks,
        )

    def _write_forecast_csv(self, records: tuple[ForecastRecord, ...]) -> None:
        import csv

        with open(self.out / "forecasts.csv", "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(
                [
                    "class", "variant", "state", "week", "season", "point", "median",
                    "lower_50", "upper_50", "lower_80", "upper_80", "lower_95", "upper_95",
                    "available", "reason",
                ]
            )
            for rec in records:
                bounds = []
                if rec.available:
                    for level, lo, hi in rec.intervals:
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
                        int(rec.available),
                        rec.reason,
                    ]
                )

    # -- debug dumps ---------------------------------------------------------

    def _dump_design(self, res: _TaskResult, week: Epiweek) -> None:
        import csv

        design = res.design
        dump_dir = self.out / "debug" / "designs"
        dump_dir.mkdir(parents=True, exist_ok=True)
        name = f"{res.spec.model_class}_{res.spec.variant}_{res.state}_{week}.csv"
        with open(dump_dir / name, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["outcome_week", "row_state", "outcome", *design.columns])
            for i in range(len(design)):
                writer.writerow(
                    [
                        str(design.outcome_weeks[i]),
                        design.row_states[i],
                        repr(float(design.y[i])),
                        *[repr(float(v)) for v in design.X[i]],
                    ]
                )
        if res.model is not None:
            coef_dir = self.out / "debug" / "coefficients"
            coef_dir.mkdir(parents=True, exist_ok=True)
            with open(coef_dir / name, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["column", "value", "class", "variant", "target", "fit_week"])
                for col, value in zip(
                    res.model.coefficients.column_names, res.model.coefficients.values
                ):
                    writer.writerow(
                        [
                            col,
                            repr(value),
                            res.spec.model_class,
                            res.spec.variant,
                            res.model.target,
                            str(res.model.fit_week),
                        ]
                    )

    def _dump_tracker_step(
        self, spec: ModelSpec, state: str, week: Epiweek, score: float, before: dict
    ) -> None:
        import csv

        dump_dir = self.out / "debug" / "trackers"
        dump_dir.mkdir(parents=True, exist_ok=True)
        path = dump_dir / f"{spec.model_class}_{spec.variant}_{state}.csv"
        new = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if new:
                writer.writerow(["week", "score", *(f"radius_before_{l}" for l in LEVELS),
                                 *(f"radius_after_{l}" for l in LEVELS)])
            group = (spec.key, state)
            writer.writerow(
                [
                    str(week),
                    repr(score),
                    *[repr(before[level]) for level in LEVELS],
                    *[repr(self.trackers[group][level].radius) for level in LEVELS],
                ]
            )


def run_backtest(config: RunConfig) -> RunResult:
    """Execute (or continue) a backtest in the configured output directory."""
    return _Engine(config).run()


def resume(output_dir: str | Path) -> RunResult:
    """Continue a partial run from its journal; no-op when already complete."""
    meta_path = Path(output_dir) / "run_metadata.json"
    if not meta_path.exists():
        raise ResumeError(f"{output_dir} has no run_metadata.json")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        stored = meta["config"]
        stored_hash = meta["config_hash"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise ResumeError(f"corrupt run metadata: {exc}") from None
    if hashlib.sha256(_canonical_json(stored).encode()).hexdigest() != stored_hash:
        raise ResumeError("config hash mismatch in run metadata")
    config = RunConfig(
        output_dir=str(output_dir),
        **{
            k: tuple(v) if isinstance(v, list) else v
            for k, v in stored.items()
        },
    )
    return run_backtest(config)
