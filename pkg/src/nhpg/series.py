"""Dated series ingestion, alignment, transforms, and descriptive statistics.

All containers are immutable after construction (arrays are set read-only),
so values can be shared freely across threads and processes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a precondition (bad CSV, bad dates,
    non-finite values, degenerate columns)."""


def _as_dates(dates) -> np.ndarray:
    arr = np.asarray(dates, dtype="datetime64[D]")
    if arr.ndim != 1:
        raise DataError("dates must be one-dimensional")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DatedSeries:
    """Daily univariate series: strictly increasing dates with finite values."""

    dates: np.ndarray
    values: np.ndarray
    name: str = "series"

    def __post_init__(self):
        dates = _freeze(_as_dates(self.dates))
        values = _freeze(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 1:
            raise DataError(f"{self.name}: values must be one-dimensional")
        if len(dates) != len(values):
            raise DataError(
                f"{self.name}: {len(dates)} dates but {len(values)} values"
            )
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            bad = int(np.argmin(dates[1:] > dates[:-1]))
            raise DataError(
                f"{self.name}: dates not strictly increasing at {dates[bad + 1]}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.argmin(np.isfinite(values)))
            raise DataError(f"{self.name}: non-finite value at {dates[bad]}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def window(self, start=None, end=None) -> "DatedSeries":
        """Restrict to dates in [start, end] (either bound optional)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start)
        if end is not None:
            mask &= self.dates <= np.datetime64(end)
        if not mask.any():
            raise DataError(f"{self.name}: empty window [{start}, {end}]")
        return DatedSeries(self.dates[mask], self.values[mask], self.name)


@dataclass(frozen=True)
class CovariatePanel:
    """Covariate matrix aligned to a date index.

    ``matrix`` holds the raw (or normalized) covariate columns; the constant
    column is *not* stored. When ``includes_intercept`` is set, design rows
    produced by :meth:`design_matrix` get a leading 1, so the model dimension
    is ``ncols + 1``.
    """

    dates: np.ndarray
    names: tuple
    matrix: np.ndarray
    includes_intercept: bool = True
    norm_means: np.ndarray | None = None
    norm_sds: np.ndarray | None = None

    def __post_init__(self):
        dates = _freeze(_as_dates(self.dates))
        matrix = _freeze(np.asarray(self.matrix, dtype=np.float64))
        names = tuple(str(n) for n in self.names)
        if matrix.ndim != 2:
            raise DataError("covariate matrix must be two-dimensional")
        if matrix.shape[0] != len(dates):
            raise DataError(
                f"covariate matrix has {matrix.shape[0]} rows "
                f"but {len(dates)} dates"
            )
        if matrix.shape[1] != len(names):
            raise DataError(
                f"covariate matrix has {matrix.shape[1]} columns "
                f"but {len(names)} names"
            )
        if not np.all(np.isfinite(matrix)):
            r, c = np.argwhere(~np.isfinite(matrix))[0]
            raise DataError(
                f"non-finite covariate value in '{names[c]}' at {dates[r]}"
            )
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "names", names)

    @property
    def nrows(self) -> int:
        return self.matrix.shape[0]

    @property
    def ncols(self) -> int:
        return self.matrix.shape[1]

    def design_matrix(self) -> np.ndarray:
        """Rows x_t used by the model; prepends the constant column."""
        if self.includes_intercept:
            return np.column_stack(
                [np.ones(self.nrows), self.matrix]
            )
        return np.array(self.matrix)

    def window(self, start=None, end=None) -> "CovariatePanel":
        mask = np.ones(self.nrows, dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start)
        if end is not None:
            mask &= self.dates <= np.datetime64(end)
        if not mask.any():
            raise DataError(f"empty covariate window [{start}, {end}]")
        return CovariatePanel(
            self.dates[mask], self.names, self.matrix[mask],
            self.includes_intercept, self.norm_means, self.norm_sds,
        )


@dataclass(frozen=True)
class DescriptiveStats:
    """First four moments; kurtosis is the non-excess standardized fourth
    moment (normal distribution = 3)."""

    mean: float
    variance: float
    kurtosis: float
    skewness: float


def log_returns(prices: DatedSeries) -> DatedSeries:
    """First difference of log prices; result is dated at the later day."""
    if len(prices) < 2:
        raise DataError(f"{prices.name}: need at least 2 prices for returns")
    nonpos = prices.values <= 0
    if nonpos.any():
        bad = int(np.argmax(nonpos))
        raise DataError(
            f"{prices.name}: non-positive price at {prices.dates[bad]}"
        )
    logp = np.log(prices.values)
    return DatedSeries(prices.dates[1:], np.diff(logp), prices.name)


def zscore_normalize(panel: CovariatePanel) -> CovariatePanel:
    """Center each column and scale to unit sample variance (denominator T-1).

    The transform parameters are retained on the returned panel so reports
    can map coefficients back to the original units.
    """
    means = panel.matrix.mean(axis=0)
    sds = panel.matrix.std(axis=0, ddof=1)
    zero = sds == 0
    if zero.any():
        raise DataError(
            f"zero-variance covariate column '{panel.names[int(np.argmax(zero))]}'"
        )
    normalized = (panel.matrix - means) / sds
    return CovariatePanel(
        panel.dates, panel.names, normalized, panel.includes_intercept,
        norm_means=_freeze(means), norm_sds=_freeze(sds),
    )


def align(
    price: DatedSeries, covariates: Sequence[DatedSeries]
) -> tuple[DatedSeries, CovariatePanel]:
    """Join covariates onto the price calendar.

    Covariates observed on sparser calendars (weekends, holidays) are carried
    forward to each price date. Leading price dates on which any covariate has
    no prior observation are dropped.
    """
    if not covariates:
        raise DataError("no covariate series supplied")
    filled = np.empty((len(price), len(covariates)))
    have = np.ones(len(price), dtype=bool)
    for j, cov in enumerate(covariates):
        # index of the last covariate observation at or before each price date
        idx = np.searchsorted(cov.dates, price.dates, side="right") - 1
        have &= idx >= 0
        filled[:, j] = cov.values[np.maximum(idx, 0)]
    if not have.any():
        raise DataError("price and covariate calendars do not overlap")
    start = int(np.argmax(have))  # rule: only leading dates can be missing
    dates = price.dates[start:]
    panel = CovariatePanel(dates, [c.name for c in covariates], filled[start:])
    return DatedSeries(dates, price.values[start:], price.name), panel


def describe(series) -> DescriptiveStats:
    """Mean, sample variance (T-1), and population-standardized skewness and
    kurtosis."""
    x = series.values if isinstance(series, DatedSeries) else np.asarray(series, float)
    if x.size < 4:
        raise DataError("need at least 4 observations to describe a series")
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0:
        raise DataError("degenerate series: zero variance")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return DescriptiveStats(
        mean=mean,
        variance=float(x.var(ddof=1)),
        kurtosis=m4 / m2**2,
        skewness=m3 / m2**1.5,
    )


def load_series_csv(path, column: str | None = None) -> DatedSeries:
    """Read one dated series from a CSV file.

    Expects a header row, ISO dates in the first column, and numeric values.
    ``column`` selects a value column by header name (default: the second
    column).
    """
    header, rows = _read_csv(path)
    if column is None:
        col = 1
    else:
        try:
            col = header.index(column)
        except ValueError:
            raise DataError(f"{path}: no column named '{column}'") from None
    dates, values = _parse_column(path, header, rows, col)
    return DatedSeries(dates, values, header[col])


def load_covariates_csv(paths: Sequence) -> list[DatedSeries]:
    """Read covariate series from one wide CSV or several per-series CSVs."""
    out: list[DatedSeries] = []
    for path in paths:
        header, rows = _read_csv(path)
        for col in range(1, len(header)):
            dates, values = _parse_column(path, header, rows, col)
            out.append(DatedSeries(dates, values, header[col]))
    if not out:
        raise DataError("covariate files contain no value columns")
    return out


def write_series_csv(path, series: DatedSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", series.name])
        for d, v in zip(series.dates, series.values):
            w.writerow([str(d), repr(float(v))])


def write_panel_csv(path, panel: CovariatePanel) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *panel.names])
        for i, d in enumerate(panel.dates):
            w.writerow([str(d)] + [repr(float(v)) for v in panel.matrix[i]])


def _read_csv(path) -> tuple[list, list]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = [row for row in reader if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    if len(header) < 2:
        raise DataError(f"{path}: need a date column and at least one value column")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return [h.strip() for h in header], rows


def _parse_column(path, header, rows, col) -> tuple[list, np.ndarray]:
    dates = []
    values = np.empty(len(rows))
    for i, row in enumerate(rows):
        if len(row) <= col:
            raise DataError(f"{path}: row {i + 2} has too few columns")
        try:
            dates.append(np.datetime64(row[0].strip(), "D"))
        except ValueError:
            raise DataError(f"{path}: bad date '{row[0]}' at row {i + 2}") from None
        try:
            values[i] = float(row[col])
        except ValueError:
            raise DataError(
                f"{path}: non-numeric '{row[col]}' in column "
                f"'{header[col]}' at {row[0]}"
            ) from None
    if not np.all(np.isfinite(values)):
        bad = int(np.argmin(np.isfinite(values)))
        raise DataError(
            f"{path}: non-finite value in column '{header[col]}' at {rows[bad][0]}"
        )
    return dates, values
