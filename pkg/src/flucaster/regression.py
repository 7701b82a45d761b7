"""Model fitting: least squares, median (LAD) regression, Poisson GLM, LVCF.

All three solvers are deterministic: fixed iteration rules, no randomized
pivoting, stable tie-breaks. Rank-deficient designs resolve to the
minimum-norm solution and set a diagnostic flag instead of failing, since
early-window fits with many neighbor columns are routinely underdetermined.

The median solver minimizes the tau=0.5 pinball loss (half the absolute
error) by iteratively reweighted least squares on the smooth surrogate
sum(sqrt(r^2 + delta^2)) with delta annealed toward zero, then polishes by
solving exact interpolations on the smallest-residual rows (LAD optima pass
through p data points). Tests validate it against an independent linear
program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ObservationTable
from .epiweek import Epiweek
from .errors import ContractError, FitError, MissingInputError
from .features import DesignMatrix, ModelSpec, PredictionRow

# Intercept coefficient used for the all-zero-counts degenerate Poisson fit:
# exp(-30) puts the predicted rate at effectively zero while keeping the
# coefficient vector finite.
_LOG_ZERO_RATE = -30.0


@dataclass(frozen=True)
class Coefficients:
    """Fitted coefficient vector aligned to a design column layout."""

    values: tuple[float, ...]
    column_names: tuple[str, ...]
    model_class: str

    def __post_init__(self) -> None:
        if len(self.values) != len(self.column_names):
            raise ContractError("coefficient/column length mismatch")
        if not all(np.isfinite(v) for v in self.values):
            raise FitError("non-finite coefficient")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class FitDiagnostics:
    objective: float
    iterations: int
    rank_deficient: bool
    converged: bool
    degenerate: bool = False


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    target: str
    fit_week: Epiweek
    coefficients: Coefficients
    diagnostics: FitDiagnostics


@dataclass(frozen=True)
class SolveResult:
    beta: np.ndarray
    objective: float
    iterations: int
    rank_deficient: bool
    converged: bool
    degenerate: bool = False


def _check_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise FitError("design matrix must be 2-dimensional")
    if X.shape[0] == 0:
        raise FitError("empty design matrix")
    if X.shape[0] != y.shape[0]:
        raise FitError(f"row mismatch: X has {X.shape[0]} rows, y has {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("design matrix or outcomes contain non-finite values")
    return X, y


def ols_solve(X: np.ndarray, y: np.ndarray) -> SolveResult:
    """Minimum-norm least squares via numpy's lstsq."""
    X, y = _check_design(X, y)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return SolveResult(
        beta=beta,
        objective=float(resid @ resid),
        iterations=1,
        rank_deficient=rank < X.shape[1],
        converged=True,
    )


def _weighted_lstsq(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(w)
    beta, _, _, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return beta


def lad_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """Pinball loss at tau=0.5: half the summed absolute residuals."""
    return 0.5 * float(np.sum(np.abs(y - X @ beta)))


def lad_solve(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_total_iter: int = 4000,
    inner_max: int = 60,
) -> SolveResult:
    """Median regression by annealed IRLS plus exact-interpolation polish."""
    X, y = _check_design(X, y)
    n, p = X.shape
    rank_deficient = np.linalg.matrix_rank(X) < p

    beta = ols_solve(X, y).beta
    resid = y - X @ beta
    scale = max(float(np.max(np.abs(resid)) if n else 1.0), 1e-8)
    iterations = 0

    delta = scale
    while delta > 1e-13 * scale:
        for _ in range(inner_max):
            iterations += 1
            if iterations > max_total_iter:
                raise FitError(
                    f"median regression exceeded {max_total_iter} iterations "
                    f"(objective {lad_objective(X, y, beta):.6g})"
                )
            w = 1.0 / np.sqrt(resid * resid + delta * delta)
            beta_new = _weighted_lstsq(X, y, w)
            step = float(np.max(np.abs(beta_new - beta)))
            beta = beta_new
            resid = y - X @ beta
            if step <= 1e-12 * (1.0 + float(np.max(np.abs(beta)))):
                break
        delta *= 0.1

    # Polish: LAD optima interpolate p rows; try exact solves on the rows with
    # the smallest absolute residuals and keep whichever candidate wins.
    best_beta = beta
    best_obj = lad_objective(X, y, beta)
    if n >= p:
        order = np.argsort(np.abs(resid), kind="stable")
        base = order[:p]
        candidates = [base]
        for start in (1, 2):
            if start + p <= n:
                candidates.append(order[start : start + p])
        for j in range(p, min(p + 3, n)):
            for i in range(p):
                cand = base.copy()
                cand[i] = order[j]
                candidates.append(cand)
        for idx in candidates:
            cand_beta, _, _, _ = np.linalg.lstsq(X[idx], y[idx], rcond=None)
            obj = lad_objective(X, y, cand_beta)
            if obj < best_obj - 1e-15:
                best_obj = obj
                best_beta = cand_beta

    return SolveResult(
        beta=best_beta,
        objective=best_obj,
        iterations=iterations,
        rank_deficient=rank_deficient,
        converged=True,
    )


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
    return 2.0 * float(np.sum(term - (y - mu)))


def _constant_column(X: np.ndarray) -> int | None:
    for j in range(X.shape[1]):
        col = X[:, j]
        if col[0] != 0.0 and np.all(col == col[0]):
            return j
    return None


def poisson_irls(
    X: np.ndarray,
    y: np.ndarray,
    offset: np.ndarray,
    *,
    max_iter: int = 50,
    rel_tol: float = 1e-8,
) -> SolveResult:
    """Poisson GLM with log link and a fixed offset, fit by IRLS.

    Stops when the relative deviance change drops below rel_tol or after
    max_iter sweeps. All-zero counts return the degenerate rate-zero fit.
    """
    X, y = _check_design(X, y)
    offset = np.asarray(offset, dtype=float).ravel()
    if offset.shape[0] != X.shape[0]:
        raise FitError("offset length mismatch")
    if not np.all(np.isfinite(offset)):
        raise FitError("offset contains non-finite values")
    if np.any(y < 0):
        raise FitError("Poisson outcomes must be nonnegative")
    n, p = X.shape
    rank_deficient = np.linalg.matrix_rank(X) < p

    if np.all(y == 0):
        beta = np.zeros(p)
        j = _constant_column(X)
        if j is not None:
            beta[j] = _LOG_ZERO_RATE / X[0, j]
        mu = np.exp(np.clip(X @ beta + offset, -300, 300))
        return SolveResult(
            beta=beta,
            objective=poisson_deviance(y, mu),
            iterations=0,
            rank_deficient=rank_deficient,
            converged=True,
            degenerate=True,
        )

    beta = np.zeros(p)
    j = _constant_column(X)
    if j is not None:
        mean_rate = float(np.sum(y) / np.sum(np.exp(offset)))
        beta[j] = np.log(mean_rate) / X[0, j]

    mu = np.exp(np.clip(X @ beta + offset, -300, 300))
    dev_prev = poisson_deviance(y, mu)
    converged = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        eta = np.clip(X @ beta + offset, -300, 300)
        mu = np.exp(eta)
        z = (eta - offset) + (y - mu) / mu
        beta = _weighted_lstsq(X, z, mu)
        if not np.all(np.isfinite(beta)):
            raise FitError(f"Poisson IRLS diverged at iteration {iterations}")
        if float(np.max(np.abs(beta))) > 1e8:
            raise FitError(
                f"Poisson IRLS separation: |beta| exceeded 1e8 at iteration {iterations}"
            )
        mu = np.exp(np.clip(X @ beta + offset, -300, 300))
        dev = poisson_deviance(y, mu)
        if not np.isfinite(dev):
            raise FitError(f"Poisson IRLS deviance diverged at iteration {iterations}")
        if abs(dev - dev_prev) / (abs(dev_prev) + 1e-10) < rel_tol:
            converged = True
            dev_prev = dev
            break
        dev_prev = dev

    return SolveResult(
        beta=beta,
        objective=dev_prev,
        iterations=iterations,
        rank_deficient=rank_deficient,
        converged=converged,
    )


def _as_fitted(design: DesignMatrix, result: SolveResult) -> FittedModel:
    return FittedModel(
        spec=design.spec,
        target=design.target,
        fit_week=design.fit_week,
        coefficients=Coefficients(
            values=tuple(float(v) for v in result.beta),
            column_names=design.columns,
            model_class=design.spec.model_class,
        ),
        diagnostics=FitDiagnostics(
            objective=result.objective,
            iterations=result.iterations,
            rank_deficient=result.rank_deficient or design.rank_warning,
            converged=result.converged,
            degenerate=result.degenerate,
        ),
    )


def fit_ols(design: DesignMatrix) -> FittedModel:
    return _as_fitted(design, ols_solve(design.X, design.y))


def fit_median(design: DesignMatrix) -> FittedModel:
    return _as_fitted(design, lad_solve(design.X, design.y))


def fit_poisson(design: DesignMatrix) -> FittedModel:
    if design.offsets is None:
        raise ContractError("Poisson fit requires design offsets")
    return _as_fitted(design, poisson_irls(design.X, design.y, design.offsets))


_FITTERS = {"linear": fit_ols, "quantile": fit_median, "poisson": fit_poisson}


def fit_model(design: DesignMatrix) -> FittedModel:
    """Dispatch to the class-appropriate solver."""
    try:
        fitter = _FITTERS[design.spec.model_class]
    except KeyError:
        raise ContractError(f"no fitter for model class {design.spec.model_class!r}")
    return fitter(design)


def predict(model: FittedModel, row: PredictionRow) -> float:
    """Point prediction on the %ILI scale.

    Poisson models predict a count exp(offset + x.beta) and convert through
    the target week's total visits so every class scores on one scale.
    """
    if row.columns != model.coefficients.column_names:
        raise ContractError(
            f"layout mismatch: model has {model.coefficients.column_names}, "
            f"row has {row.columns}"
        )
    linear_term = float(row.x @ model.coefficients.as_array())
    if model.coefficients.model_class != "poisson":
        return linear_term
    if row.offset is None or row.outcome_visits is None:
        raise ContractError("Poisson prediction row lacks offset/visits")
    if row.outcome_visits <= 0:
        raise MissingInputError(
            f"no visits reported for {row.target} at {row.target_week}; "
            f"count cannot convert to %ILI"
        )
    predicted_count = float(np.exp(min(row.offset + linear_term, 300.0)))
    return 100.0 * predicted_count / row.outcome_visits


def lvcf_predict(table: ObservationTable, state: str, t: Epiweek) -> float:
    """Last value carried forward: the t+2 prediction is the %ILI at t."""
    value = table.ili(state, t)
    if value is None:
        raise MissingInputError(f"missing %ILI for {state} at {t}")
    return value


def in_sample_residuals(model: FittedModel, design: DesignMatrix) -> np.ndarray:
    """Training residuals (truth - prediction) on the %ILI scale."""
    beta = model.coefficients.as_array()
    fitted = design.X @ beta
    if model.coefficients.model_class != "poisson":
        return design.y - fitted
    counts = np.exp(np.clip(design.offsets + fitted, -300, 300))
    visits = design.outcome_visits.astype(float)
    keep = visits > 0
    truth_pct = 100.0 * design.y[keep] / visits[keep]
    fitted_pct = 100.0 * counts[keep] / visits[keep]
    return truth_pct - fitted_pct
