import datetime as dt
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbasis.analytics import (
    SYNTHETIC_TRUTH,
    IngestionError,
    SingularDesignError,
    TimeSeriesTable,
    ols,
    parse_table,
    read_table,
    regress_basis,
    synthetic_table,
    write_table,
)


def _design(n, seed):
    rng = np.random.default_rng(seed)
    return np.column_stack([np.ones(n), rng.normal(size=(n, 2))])


def test_exact_line_fit():
    x = np.arange(10.0)
    res = ols(1.0 + 2.0 * x, np.column_stack([np.ones(10), x]))
    np.testing.assert_allclose(res.coefficients, [1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(res.std_errors, 0.0, atol=1e-10)
    assert res.r_squared == pytest.approx(1.0)


def test_constant_response_is_flagged():
    X = _design(20, 0)
    res = ols(np.full(20, 3.0), X)
    assert res.degenerate and res.r_squared == 0.0
    np.testing.assert_allclose(res.coefficients, [3.0, 0.0, 0.0], atol=1e-12)


def test_singular_design():
    X = _design(20, 1)
    with pytest.raises(SingularDesignError):
        ols(np.ones(20), np.column_stack([X, X[:, 1] * 2.0]))
    with pytest.raises(SingularDesignError):
        ols(np.ones(2), X[:2])


@settings(max_examples=30, deadline=None)
@given(st.integers(12, 60), st.integers(0, 10_000))
def test_matches_pseudoinverse(n, seed):
    X = _design(n, seed)
    y = np.random.default_rng(seed + 1).normal(size=n)
    res = ols(y, X)
    beta = np.linalg.pinv(X) @ y
    np.testing.assert_allclose(res.coefficients, beta, atol=1e-8)
    resid = y - X @ beta
    cov = resid @ resid / (n - 3) * np.linalg.pinv(X.T @ X)
    np.testing.assert_allclose(res.std_errors, np.sqrt(np.diag(cov)), atol=1e-8)


def test_shift_and_scale_invariance():
    X = _design(50, 2)
    y = np.random.default_rng(3).normal(size=50)
    base = ols(y, X)
    shifted = ols(y + 5.0, X)
    assert shifted.coefficients[0] == pytest.approx(base.coefficients[0] + 5.0)
    np.testing.assert_allclose(shifted.coefficients[1:], base.coefficients[1:], atol=1e-12)
    scaled = ols(y, X * np.array([1.0, 10.0, 1.0]))
    assert scaled.coefficients[1] == pytest.approx(base.coefficients[1] / 10.0)
    assert scaled.r_squared == pytest.approx(base.r_squared)


def test_synthetic_recovery():
    res = regress_basis(synthetic_table(3000, seed=0))
    for term, truth in SYNTHETIC_TRUTH.items():
        assert abs(res.coefficient(term) - truth) <= 3 * res.std_error(term)


def test_shipped_synthetic_file():
    table = read_table(resources.files("fairbasis") / "data" / "synthetic_basis.csv")
    res = regress_basis(table)
    assert res.n_obs == len(table)
    for term, truth in SYNTHETIC_TRUTH.items():
        assert abs(res.coefficient(term) - truth) <= 3 * res.std_error(term)


def test_minimal_table_and_round_trip(tmp_path):
    table = synthetic_table(10, seed=4)
    res = regress_basis(table)
    assert res.n_obs == 10
    path = tmp_path / "t.csv"
    write_table(table, path)
    again = read_table(path)
    assert again.dates == table.dates
    np.testing.assert_allclose(again.basis, table.basis, rtol=1e-8)
    with pytest.raises(IngestionError, match="at least 10"):
        regress_basis(synthetic_table(9, seed=4))


def _csv(rows):
    return "date,basis,lois,vix\n" + "\n".join(rows) + "\n"


def test_ingestion_errors():
    good = [f"2020-01-{d:02d},0.1,0.002,0.2" for d in range(1, 12)]
    assert len(parse_table(_csv(good))) == 11
    bad = list(good)
    bad[3] = "2020-01-04,abc,0.002,0.2"
    with pytest.raises(IngestionError, match="row 5"):
        parse_table(_csv(bad))
    with pytest.raises(IngestionError, match="vix"):
        parse_table("date,basis,lois\n2020-01-01,0.1,0.002\n")
    with pytest.raises(IngestionError, match="not after"):
        parse_table(_csv([good[1], good[0]]))
    with pytest.raises(IngestionError):
        parse_table("")


def test_table_requires_increasing_dates():
    d = dt.date(2020, 1, 1)
    with pytest.raises(IngestionError):
        TimeSeriesTable([d, d], np.zeros(2), np.zeros(2), np.zeros(2))


def test_result_rows():
    res = regress_basis(synthetic_table(100, seed=1))
    rows = res.rows()
    assert [r[0] for r in rows] == ["intercept", "lois", "vix", "r_squared", "n_obs"]
    assert rows[-1] == ["n_obs", "100"]
