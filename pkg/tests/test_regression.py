"""Solver correctness against independent oracles, plus the fit/predict API."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from flucaster.data import Observation, ObservationTable
from flucaster.epiweek import Epiweek
from flucaster.errors import ContractError, FitError, MissingInputError
from flucaster.features import DesignMatrix, ModelSpec, PredictionRow
from flucaster.regression import (
    Coefficients,
    FittedModel,
    FitDiagnostics,
    in_sample_residuals,
    lad_objective,
    lad_solve,
    lvcf_predict,
    ols_solve,
    poisson_irls,
    predict,
)

WEEK = Epiweek(2012, 45)


def make_design(X, y, model_class="linear", offsets=None, visits=None) -> DesignMatrix:
    X = np.asarray(X, dtype=float)
    return DesignMatrix(
        spec=ModelSpec(model_class, "isolated"),
        target="MA",
        fit_week=WEEK,
        columns=tuple(f"c{i}" for i in range(X.shape[1])),
        X=X,
        y=np.asarray(y, dtype=float),
        offsets=None if offsets is None else np.asarray(offsets, dtype=float),
        outcome_visits=None if visits is None else np.asarray(visits, dtype=int),
        row_states=("MA",) * len(y),
        outcome_weeks=tuple(WEEK for _ in y),
        rank_warning=X.shape[0] < X.shape[1],
    )


def make_model(beta, model_class="linear") -> FittedModel:
    beta = tuple(float(b) for b in beta)
    return FittedModel(
        spec=ModelSpec(model_class, "isolated"),
        target="MA",
        fit_week=WEEK,
        coefficients=Coefficients(
            values=beta,
            column_names=tuple(f"c{i}" for i in range(len(beta))),
            model_class=model_class,
        ),
        diagnostics=FitDiagnostics(0.0, 1, False, True),
    )


def make_row(x, model_class="linear", offset=None, visits=None) -> PredictionRow:
    x = np.asarray(x, dtype=float)
    return PredictionRow(
        spec=ModelSpec(model_class, "isolated"),
        target="MA",
        fit_week=WEEK,
        target_week=WEEK.add(2),
        columns=tuple(f"c{i}" for i in range(len(x))),
        x=x,
        offset=offset,
        outcome_visits=visits,
    )


# -- oracles ----------------------------------------------------------------


def normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


def lp_lad_objective(X, y):
    """Median-regression objective by linear programming (independent route)."""
    n, p = X.shape
    c = np.concatenate([np.zeros(p), np.ones(n), np.ones(n)])
    A_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return 0.5 * res.fun


def newton_poisson(X, y, offset, iters=200, tol=1e-12):
    """Full Newton on the Poisson log-likelihood (independent of IRLS path)."""
    beta = np.zeros(X.shape[1])
    for _ in range(iters):
        mu = np.exp(X @ beta + offset)
        grad = X.T @ (y - mu)
        hess = X.T @ (X * mu[:, None])
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


# -- OLS ----------------------------------------------------------------------


def test_ols_recovers_exact_linear_data():
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.standard_normal((30, 3)), np.ones(30)])
    beta_true = np.array([1.5, -2.0, 0.3, 4.0])
    y = X @ beta_true
    result = ols_solve(X, y)
    assert np.max(np.abs(y - X @ result.beta)) < 1e-8
    assert np.allclose(result.beta, beta_true, atol=1e-8)
    assert not result.rank_deficient


def test_ols_intercept_only_is_mean():
    y = np.array([1.0, 2.0, 6.0])
    result = ols_solve(np.ones((3, 1)), y)
    assert result.beta[0] == pytest.approx(np.mean(y), abs=1e-12)


def test_ols_duplicated_column_min_norm_and_flag():
    rng = np.random.default_rng(2)
    base = rng.standard_normal((20, 2))
    X = np.column_stack([base, base[:, 0]])  # exact duplicate
    y = rng.standard_normal(20)
    result = ols_solve(X, y)
    assert result.rank_deficient
    # minimum-norm: among solutions with equal fit, lstsq returns the smallest
    fitted = X @ result.beta
    alt = result.beta + np.array([1.0, 0.0, -1.0])  # same fit, larger norm
    assert np.allclose(X @ alt, fitted)
    assert np.linalg.norm(result.beta) < np.linalg.norm(alt)


def test_ols_residual_orthogonality():
    rng = np.random.default_rng(3)
    for _ in range(10):
        X = np.column_stack([rng.standard_normal((25, 3)), np.ones(25)])
        y = rng.standard_normal(25) * 3
        result = ols_solve(X, y)
        resid = y - X @ result.beta
        scale = np.abs(X).max()
        assert np.max(np.abs(X.T @ resid)) < 1e-6 * max(scale, 1.0) * len(y)


def test_ols_empty_matrix_errors():
    with pytest.raises(FitError, match="empty"):
        ols_solve(np.empty((0, 2)), np.empty(0))
    with pytest.raises(FitError):
        ols_solve(np.array([[np.nan]]), np.array([1.0]))


def test_ols_matches_normal_equations_battery():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(8, 41))
        p = int(rng.integers(1, 7))
        X = np.column_stack([rng.standard_normal((n, p - 1)), np.ones(n)]) if p > 1 else np.ones((n, 1))
        y = rng.standard_normal(n)
        got = ols_solve(X, y).beta
        want = normal_equations(X, y)
        assert np.max(np.abs(got - want)) < 1e-8


# -- median -------------------------------------------------------------------


def test_median_intercept_only():
    y = np.array([1.0, 2.0, 3.0, 10.0])
    result = lad_solve(np.ones((4, 1)), y)
    med_lo, med_hi = 2.0, 3.0  # any value in the median interval is optimal
    assert med_lo - 1e-9 <= result.beta[0] <= med_hi + 1e-9
    expected_obj = 0.5 * np.sum(np.abs(y - np.median(y)))
    assert result.objective == pytest.approx(expected_obj, rel=1e-9)


def test_median_exact_fit_zero_objective():
    rng = np.random.default_rng(5)
    X = np.column_stack([rng.standard_normal((12, 2)), np.ones(12)])
    beta_true = np.array([2.0, -1.0, 0.5])
    result = lad_solve(X, X @ beta_true)
    assert result.objective < 1e-10


def test_median_unmoved_by_same_sign_outlier_growth():
    rng = np.random.default_rng(6)
    X = np.column_stack([rng.standard_normal(21), np.ones(21)])
    y = X @ np.array([1.0, 2.0]) + rng.standard_normal(21) * 0.5
    base = lad_solve(X, y)
    resid = y - X @ base.beta
    j = int(np.argmax(resid))  # strictly positive residual
    assert resid[j] > 0
    y2 = y.copy()
    y2[j] += 25.0  # push further in the same direction
    moved = lad_solve(X, y2)
    # the fit is unchanged; objective grows by exactly half the added slack
    assert np.allclose(moved.beta, base.beta, atol=1e-7)
    assert moved.objective == pytest.approx(base.objective + 0.5 * 25.0, rel=1e-9)
    assert moved.objective == pytest.approx(lp_lad_objective(X, y2), rel=1e-9)


def test_median_subgradient_sign_balance():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(10, 40))
        X = np.column_stack([rng.standard_normal((n, 2)), np.ones(n)])
        y = rng.standard_normal(n) * 2.0
        result = lad_solve(X, y)
        resid = y - X @ result.beta
        n_pos = int(np.sum(resid > 1e-9))
        n_neg = int(np.sum(resid < -1e-9))
        assert n_pos <= n / 2
        assert n_neg <= n / 2


def test_median_matches_lp_oracle_battery():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(6, 41))
        p = min(int(rng.integers(1, 7)), n - 1)
        X = np.column_stack([rng.standard_normal((n, p - 1)), np.ones(n)]) if p > 1 else np.ones((n, 1))
        y = X @ rng.standard_normal(p) + rng.standard_normal(n)
        got = lad_solve(X, y).objective
        want = lp_lad_objective(X, y)
        assert abs(got - want) <= 1e-6 * max(abs(want), 1e-12)


# -- Poisson ------------------------------------------------------------------


def test_poisson_intercept_only_rate_identity():
    rng = np.random.default_rng(9)
    visits = rng.integers(1000, 5000, size=40).astype(float)
    counts = rng.poisson(visits * 0.02).astype(float)
    offset = np.log(visits)
    result = poisson_irls(np.ones((40, 1)), counts, offset)
    rate = np.exp(result.beta[0])
    assert rate == pytest.approx(counts.sum() / visits.sum(), rel=1e-10)
    assert result.converged


def test_poisson_recovers_simulated_coefficients_within_3se():
    rng = np.random.default_rng(10)
    n = 500
    X = np.column_stack([rng.standard_normal((n, 2)) * 0.5, np.ones(n)])
    offset = np.log(rng.integers(500, 2000, size=n).astype(float))
    beta_true = np.array([0.3, -0.2, -4.0])
    mu = np.exp(X @ beta_true + offset)
    y = rng.poisson(mu).astype(float)
    result = poisson_irls(X, y, offset)
    fitted_mu = np.exp(X @ result.beta + offset)
    cov = np.linalg.inv(X.T @ (X * fitted_mu[:, None]))
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(result.beta - beta_true) < 3 * se)


def test_poisson_all_zero_counts_degenerate():
    X = np.column_stack([np.zeros((10, 1)) + 0.3, np.ones(10)])
    offset = np.full(10, np.log(2000.0))
    result = poisson_irls(X, np.zeros(10), offset)
    assert result.degenerate
    rate = np.exp(X @ result.beta + offset)
    assert np.max(rate) < 1e-6


def test_poisson_score_equations_and_count_preservation():
    rng = np.random.default_rng(11)
    n = 80
    X = np.column_stack([rng.standard_normal((n, 2)), np.ones(n)])
    offset = np.log(rng.integers(1000, 3000, size=n).astype(float))
    y = rng.poisson(np.exp(X @ np.array([0.2, 0.1, -4.5]) + offset)).astype(float)
    result = poisson_irls(X, y, offset)
    mu = np.exp(X @ result.beta + offset)
    score = X.T @ (y - mu)
    assert np.max(np.abs(score)) < 1e-6 * max(1.0, y.sum())
    assert y.sum() == pytest.approx(mu.sum(), rel=1e-6)


def test_poisson_matches_newton_battery():
    rng = np.random.default_rng(12)
    for _ in range(25):
        n = int(rng.integers(20, 41))
        p = min(int(rng.integers(1, 7)), 4)
        X = np.column_stack([rng.standard_normal((n, p - 1)) * 0.4, np.ones(n)]) if p > 1 else np.ones((n, 1))
        offset = np.log(rng.integers(800, 2000, size=n).astype(float))
        beta_true = np.concatenate([rng.standard_normal(p - 1) * 0.3, [-4.0]])
        y = rng.poisson(np.exp(X @ beta_true + offset)).astype(float)
        got = poisson_irls(X, y, offset).beta
        want = newton_poisson(X, y, offset)
        assert np.max(np.abs(got - want)) < 1e-6


def test_poisson_negative_counts_rejected():
    with pytest.raises(FitError):
        poisson_irls(np.ones((3, 1)), np.array([1.0, -1.0, 2.0]), np.zeros(3))


# -- predict / LVCF -----------------------------------------------------------


def test_predict_zero_coefficients_linear():
    model = make_model([0.0, 0.0])
    row = make_row([3.1, 1.0])
    assert predict(model, row) == 0.0


def test_predict_poisson_count_conversion():
    # exp(offset + 0) = V/2 converts to exactly 50%
    visits = 1800
    model = make_model([0.0], model_class="poisson")
    row = make_row([1.0], model_class="poisson", offset=np.log(visits / 2.0), visits=visits)
    assert predict(model, row) == pytest.approx(50.0, abs=1e-12)


def test_predict_layout_mismatch_is_contract_error():
    model = make_model([1.0, 2.0])
    row = make_row([1.0, 2.0, 3.0])
    with pytest.raises(ContractError, match="layout"):
        predict(model, row)


def _mini_table():
    rows = (
        Observation("GA", Epiweek(2015, 40), 3.1, 62, 2000, 10),
        Observation("GA", Epiweek(2015, 41), 3.4, 68, 2000, 10),
    )
    return ObservationTable(rows)


def test_lvcf_identity_and_missing():
    table = _mini_table()
    assert lvcf_predict(table, "GA", Epiweek(2015, 40)) == 3.1
    with pytest.raises(MissingInputError):
        lvcf_predict(table, "GA", Epiweek(2015, 45))
    with pytest.raises(MissingInputError):
        lvcf_predict(table, "AL", Epiweek(2015, 40))


def test_lvcf_constant_series_zero_error():
    rows = tuple(
        Observation("GA", Epiweek(2015, 40).add(k), 2.0, 40, 2000, 10) for k in range(6)
    )
    table = ObservationTable(rows)
    for k in range(4):
        t = Epiweek(2015, 40).add(k)
        truth = table.ili("GA", t.add(2))
        assert lvcf_predict(table, "GA", t) == truth


# -- determinism / wrapper ------------------------------------------------------


def test_fits_are_bit_identical_across_runs():
    rng = np.random.default_rng(13)
    X = np.column_stack([rng.standard_normal((30, 3)), np.ones(30)])
    y = rng.standard_normal(30) * 2 + 1
    assert ols_solve(X, y).beta.tobytes() == ols_solve(X, y).beta.tobytes()
    assert lad_solve(X, y).beta.tobytes() == lad_solve(X, y).beta.tobytes()
    offset = np.log(np.full(30, 1500.0))
    counts = rng.poisson(np.exp(X @ np.array([0.1, 0.05, -0.1, -4.0]) + offset)).astype(float)
    assert (
        poisson_irls(X, counts, offset).beta.tobytes()
        == poisson_irls(X, counts, offset).beta.tobytes()
    )


def test_fit_model_dispatch_and_residuals():
    from flucaster.regression import fit_model

    rng = np.random.default_rng(14)
    X = np.column_stack([rng.standard_normal((25, 2)), np.ones(25)])
    y = X @ np.array([1.0, -0.5, 2.0]) + rng.standard_normal(25) * 0.1
    design = make_design(X, y)
    model = fit_model(design)
    assert model.coefficients.column_names == design.columns
    resid = in_sample_residuals(model, design)
    assert np.allclose(resid, y - X @ model.coefficients.as_array())

    # Poisson residuals come back on the %ILI scale
    visits = np.full(25, 2000)
    counts = rng.poisson(40, size=25).astype(float)
    design_p = make_design(
        X, counts, model_class="poisson", offsets=np.log(visits.astype(float)), visits=visits
    )
    model_p = fit_model(design_p)
    resid_p = in_sample_residuals(model_p, design_p)
    assert resid_p.shape == (25,)
    assert np.max(np.abs(resid_p)) < 100.0
