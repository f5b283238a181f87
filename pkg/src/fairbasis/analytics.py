"""OLS regression of a basis series on funding (Libor-OIS) and volatility (VIX) proxies.

Units pass through untouched: coefficient magnitudes depend on whatever units
the input file uses for ``basis``, ``lois`` and ``vix``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COLUMNS = ("date", "basis", "lois", "vix")
MIN_ROWS = 10


class SingularDesignError(ValueError):
    pass


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionResult:
    terms: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    r_squared: float
    n_obs: int
    degenerate: bool = False

    def coefficient(self, term: str) -> float:
        return float(self.coefficients[self.terms.index(term)])

    def std_error(self, term: str) -> float:
        return float(self.std_errors[self.terms.index(term)])

    def rows(self) -> list[list[str]]:
        """CSV body under ``term,coefficient,std_error``, then ``r_squared`` and ``n_obs`` rows."""
        out = [[t, f"{c:.9g}", f"{s:.9g}"] for t, c, s in zip(self.terms, self.coefficients, self.std_errors)]
        out.append(["r_squared", f"{self.r_squared:.9g}"])
        out.append(["n_obs", str(self.n_obs)])
        return out


@dataclass(frozen=True)
class TimeSeriesTable:
    dates: tuple[dt.date, ...]
    basis: np.ndarray
    lois: np.ndarray
    vix: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if not (self.basis.size == self.lois.size == self.vix.size == n):
            raise IngestionError("column lengths differ")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise IngestionError("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)


def ols(y, X, terms: tuple[str, ...] | None = None) -> RegressionResult:
    """Least squares via a QR factorisation of the design.

    ``X`` must already contain the intercept column. A constant ``y`` gives
    ``r_squared = 0`` with ``degenerate`` set.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("y must be a vector with one entry per design row")
    n, k = X.shape
    if n < k:
        raise SingularDesignError(f"{n} observations cannot identify {k} coefficients")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(n, k) * np.finfo(float).eps * diag.max():
        raise SingularDesignError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    dof = n - k
    sigma2 = rss / dof if dof > 0 else 0.0
    r_inv = np.linalg.inv(r)
    se = np.sqrt(sigma2 * np.sum(r_inv**2, axis=1))
    degenerate = tss <= 0.0
    r2 = 0.0 if degenerate else min(max(1.0 - rss / tss, 0.0), 1.0)
    if terms is None:
        terms = ("intercept",) + tuple(f"x{i}" for i in range(1, k))
    return RegressionResult(tuple(terms), beta, se, r2, n, degenerate)


def design_matrix(table: TimeSeriesTable) -> np.ndarray:
    return np.column_stack((np.ones(len(table)), table.lois, table.vix))


def regress_basis(table: TimeSeriesTable) -> RegressionResult:
    if len(table) < MIN_ROWS:
        raise IngestionError(f"need at least {MIN_ROWS} rows, got {len(table)}")
    return ols(table.basis, design_matrix(table), ("intercept", "lois", "vix"))


def read_table(path) -> TimeSeriesTable:
    """Read a ``date,basis,lois,vix`` CSV file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    return parse_table(text)


def parse_table(text: str) -> TimeSeriesTable:
    """Parse ``date,basis,lois,vix`` CSV text; errors name the offending row (1-based, header is row 1)."""
    with io.StringIO(text, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError("empty file") from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"missing column(s): {', '.join(missing)}")
        idx = {c: header.index(c) for c in COLUMNS}
        dates, values = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                cells = {c: row[i].strip() for c, i in idx.items()}
            except IndexError:
                raise IngestionError(f"row {row_no}: expected {len(header)} fields, got {len(row)}") from None
            try:
                date = dt.date.fromisoformat(cells["date"])
            except ValueError:
                raise IngestionError(f"row {row_no}: bad date {cells['date']!r}") from None
            nums = []
            for c in COLUMNS[1:]:
                try:
                    x = float(cells[c])
                except ValueError:
                    raise IngestionError(f"row {row_no}: non-numeric {c} value {cells[c]!r}") from None
                if not math.isfinite(x):
                    raise IngestionError(f"row {row_no}: {c} is not finite")
                nums.append(x)
            if dates and date <= dates[-1]:
                raise IngestionError(f"row {row_no}: date {date} is not after {dates[-1]}")
            dates.append(date)
            values.append(nums)
    arr = np.asarray(values, dtype=float).reshape(-1, 3)
    return TimeSeriesTable(tuple(dates), arr[:, 0], arr[:, 1], arr[:, 2])


def write_table(table: TimeSeriesTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for d, b, l, v in zip(table.dates, table.basis, table.lois, table.vix):
            writer.writerow([d.isoformat(), f"{b:.9g}", f"{l:.9g}", f"{v:.9g}"])


# Ground truth for the synthetic generator. lois and vix are decimal
# fractions (0.002 is 20bp, 0.2 is a VIX of 20); basis is in percent.
SYNTHETIC_TRUTH = {"intercept": 0.35, "lois": -46.0, "vix": -2.66}
SYNTHETIC_NOISE = 0.2


def synthetic_table(n: int = 3000, seed: int = 0, start: dt.date = dt.date(2005, 1, 3)) -> TimeSeriesTable:
    """Business-day series with ``basis = 0.35 - 46 lois - 2.66 vix + N(0, 0.2^2)``."""
    rng = np.random.default_rng(seed)
    lois = np.abs(0.002 + 0.0015 * rng.standard_normal(n))
    vix = 0.12 + rng.gamma(shape=4.0, scale=0.02, size=n)
    noise = SYNTHETIC_NOISE * rng.standard_normal(n)
    t = SYNTHETIC_TRUTH
    basis = t["intercept"] + t["lois"] * lois + t["vix"] * vix + noise
    dates, d = [], start
    while len(dates) < n:
        if d.weekday() < 5:
            dates.append(d)
        d += dt.timedelta(days=1)
    return TimeSeriesTable(tuple(dates), basis, lois, vix)
