"""Unit-root, autocorrelation, stationarity, random-walk, and normality
tests with 5%-level decisions.

Unit-root and KPSS p-values come from interpolation in published
critical-value tables rather than response-surface regressions; outside the
tabulated range they are reported as bracketed bounds (p <= 0.01 or
p >= 0.10/0.99), which is how the reports print extreme values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .series import DataError, DatedSeries, DescriptiveStats, describe

# Lower-tail percentiles of the t-ratio in the unit-root regression,
# by sample size, without and with a constant term (Fuller's tables).
_DF_LEVELS = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_DF_SIZES = np.array([25.0, 50.0, 100.0, 250.0, 500.0, np.inf])
_DF_TABLE_NC = np.array([
    [-2.66, -2.26, -1.95, -1.60, 0.92, 1.33, 1.70, 2.16],
    [-2.62, -2.25, -1.95, -1.61, 0.91, 1.31, 1.66, 2.08],
    [-2.60, -2.24, -1.95, -1.61, 0.90, 1.29, 1.64, 2.03],
    [-2.58, -2.23, -1.95, -1.62, 0.89, 1.29, 1.63, 2.01],
    [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
    [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
])
_DF_TABLE_C = np.array([
    [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
    [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
    [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
    [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
    [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
    [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
])

# Upper-tail critical values of the stationarity statistic (level / trend
# versions), at significance 10%, 5%, 2.5%, 1%.
_KPSS_SIG = np.array([0.10, 0.05, 0.025, 0.01])
_KPSS_CRIT_LEVEL = np.array([0.347, 0.463, 0.574, 0.739])
_KPSS_CRIT_TREND = np.array([0.119, 0.146, 0.176, 0.216])


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test.

    ``bracketed`` is None for interior p-values and "<=" / ">=" when the
    statistic fell outside the tabulated range, in which case ``p_value``
    holds the table bound.
    """

    name: str
    statistic: float
    p_value: float
    bracketed: str | None = None
    lags: int | None = None
    reject_at_5pct: bool = False
    details: dict = field(default_factory=dict)


def _values(series) -> np.ndarray:
    if isinstance(series, DatedSeries):
        return np.asarray(series.values, float)
    return np.asarray(series, float)


def _report(name, stat, p, bracketed=None, lags=None, **details) -> TestReport:
    return TestReport(
        name=name,
        statistic=float(stat),
        p_value=float(p),
        bracketed=bracketed,
        lags=lags,
        reject_at_5pct=bool(p < 0.05),
        details=details,
    )


def _df_pvalue(stat: float, nobs: int, with_const: bool) -> tuple[float, str | None]:
    table = _DF_TABLE_C if with_const else _DF_TABLE_NC
    # interpolate rows in 1/n, then the statistic within the row
    recip = np.where(np.isinf(_DF_SIZES), 0.0, 1.0 / _DF_SIZES)
    r = 0.0 if nobs >= _DF_SIZES[-2] * 2 else 1.0 / nobs
    order = np.argsort(recip)
    crits = np.array([
        np.interp(r, recip[order], table[order, j]) for j in range(len(_DF_LEVELS))
    ])
    if stat <= crits[0]:
        return float(_DF_LEVELS[0]), "<="
    if stat >= crits[-1]:
        return float(_DF_LEVELS[-1]), ">="
    return float(np.interp(stat, crits, _DF_LEVELS)), None


def _ols_tstat(yvec: np.ndarray, X: np.ndarray, col: int) -> float:
    """t-ratio on one regression coefficient."""
    coef, _, _, _ = np.linalg.lstsq(X, yvec, rcond=None)
    resid = yvec - X @ coef
    dof = len(yvec) - X.shape[1]
    s2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(s2 * xtx_inv[col, col])
    return float(coef[col] / se)


def adf_test(series, p: int = 7, drift: bool = True) -> TestReport:
    """Augmented unit-root regression with p lagged differences; the null is
    a unit root, rejected for large negative statistics."""
    y = _values(series)
    if len(y) < p + 20:
        raise DataError(f"need at least {p + 20} observations for lag order {p}")
    dy = np.diff(y)
    rows = len(dy) - p
    cols = [y[p:-1]]
    for j in range(1, p + 1):
        cols.append(dy[p - j:len(dy) - j])
    if drift:
        cols.append(np.ones(rows))
    X = np.column_stack(cols)
    stat = _ols_tstat(dy[p:], X, 0)
    pval, bracket = _df_pvalue(stat, rows, drift)
    return _report(
        "ADF" if p > 0 or drift else "DF", stat, pval, bracket, lags=p, drift=drift
    )


def df_test(series) -> TestReport:
    """Plain unit-root t-ratio (no constant, no lagged differences)."""
    y = _values(series)
    if len(y) < 20:
        raise DataError("need at least 20 observations")
    report = adf_test(series, p=0, drift=False)
    return _report("DF", report.statistic, report.p_value, report.bracketed)


def autocorrelations(x: np.ndarray, nlags: int) -> np.ndarray:
    x = np.asarray(x, float)
    xc = x - x.mean()
    denom = float(xc @ xc)
    return np.array([float(xc[k:] @ xc[:-k]) / denom for k in range(1, nlags + 1)])


def lbq_test(series, p: int = 10) -> TestReport:
    """Portmanteau test that the first p autocorrelations are jointly zero."""
    y = _values(series)
    n = len(y)
    if p < 1:
        raise DataError("lag order must be >= 1")
    if n <= 3 * p:
        raise DataError(f"need more than {3 * p} observations for {p} lags")
    rho = autocorrelations(y, p)
    q = n * (n + 2) * float(np.sum(rho**2 / (n - np.arange(1, p + 1))))
    return _report("LBQ", q, stats.chi2.sf(q, p), lags=p)


def kpss_test(series, trend: bool = True) -> TestReport:
    """Stationarity test; the null is (trend-)stationarity, rejected for
    large statistics. The long-run variance uses a Bartlett kernel with
    bandwidth floor(4 (T/100)^(1/4))."""
    y = _values(series)
    n = len(y)
    if n < 20:
        raise DataError("need at least 20 observations")
    if trend:
        X = np.column_stack([np.ones(n), np.arange(1.0, n + 1)])
    else:
        X = np.ones((n, 1))
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    e = y - X @ coef
    s = np.cumsum(e)
    bw = int(np.floor(4.0 * (n / 100.0) ** 0.25))
    lrv = float(e @ e) / n
    for lag in range(1, bw + 1):
        gamma = float(e[lag:] @ e[:-lag]) / n
        lrv += 2.0 * (1.0 - lag / (bw + 1.0)) * gamma
    stat = float(s @ s) / (n * n * lrv)
    crit = _KPSS_CRIT_TREND if trend else _KPSS_CRIT_LEVEL
    if stat >= crit[-1]:
        pval, bracket = float(_KPSS_SIG[-1]), "<="
    elif stat <= crit[0]:
        pval, bracket = float(_KPSS_SIG[0]), ">="
    else:
        pval, bracket = float(np.interp(stat, crit, _KPSS_SIG)), None
    return _report("KPSS", stat, pval, bracket, lags=bw, trend=trend)


def variance_ratio(series, q: int) -> float:
    """Ratio of the q-period increment variance to q times the one-period
    increment variance (overlapping, bias-adjusted). Equals 1 exactly at
    q = 1."""
    y = _values(series)
    r = np.diff(y)
    n = len(r)
    if q < 1 or n <= q:
        raise DataError(f"holding period {q} too large for {n} increments")
    mu = float(r.mean())
    var1 = float(np.sum((r - mu) ** 2)) / (n - 1)
    csum = np.concatenate([[0.0], np.cumsum(r)])
    qsums = csum[q:] - csum[:-q]
    m = q * (n - q + 1) * (1.0 - q / n)
    varq = float(np.sum((qsums - q * mu) ** 2)) / m
    return varq / var1


def vr_test(series, periods=(2, 4, 8, 16)) -> TestReport:
    """Random-walk test via variance ratios with heteroskedasticity-robust
    standard errors.

    Each holding period yields an asymptotically standard normal statistic;
    the joint report takes the largest absolute statistic with a Bonferroni
    bound on the p-value (bracketed as an upper bound when several periods
    are combined). Per-period results are kept in ``details``.
    """
    y = _values(series)
    periods = tuple(int(q) for q in periods)
    if not periods or min(periods) < 2:
        raise DataError("holding periods must be integers >= 2")
    if len(y) < 10 * max(periods):
        raise DataError(
            f"need at least {10 * max(periods)} observations for period {max(periods)}"
        )
    r = np.diff(y)
    mu = float(r.mean())
    a = (r - mu) ** 2
    denom = float(np.sum(a)) ** 2
    per_period = {}
    z_best = 0.0
    q_best = periods[0]
    for q in periods:
        vr = variance_ratio(y, q)
        theta = 0.0
        for j in range(1, q):
            delta = float(np.sum(a[j:] * a[:-j])) / denom
            theta += (2.0 * (q - j) / q) ** 2 * delta
        z = (vr - 1.0) / np.sqrt(theta)
        pz = 2.0 * stats.norm.sf(abs(z))
        per_period[q] = {"vr": vr, "z": float(z), "p": float(pz)}
        if abs(z) > abs(z_best):
            z_best, q_best = float(z), q
    p_joint = min(1.0, len(periods) * per_period[q_best]["p"])
    bracket = "<=" if len(periods) > 1 else None
    return _report(
        "VR", z_best, p_joint, bracket, lags=q_best, periods=per_period
    )


def jb_test(series) -> TestReport:
    """Normality test from skewness and kurtosis."""
    y = _values(series)
    n = len(y)
    if n < 20:
        raise DataError("need at least 20 observations")
    c = y - y.mean()
    m2 = float(np.mean(c**2))
    if m2 == 0:
        raise DataError("degenerate series: zero variance")
    skew = float(np.mean(c**3)) / m2**1.5
    kurt = float(np.mean(c**4)) / m2**2
    jb = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    return _report("JB", jb, stats.chi2.sf(jb, 2))


def run_battery(
    series, lbq_lags: int = 10, adf_lags: int = 7, vr_periods=(2, 4, 8, 16)
) -> list:
    """All six tests on one series, in report order."""
    return [
        df_test(series),
        adf_test(series, p=adf_lags, drift=True),
        lbq_test(series, p=lbq_lags),
        kpss_test(series, trend=True),
        vr_test(series, periods=vr_periods),
        jb_test(series),
    ]


@dataclass(frozen=True)
class SubseriesReport:
    """Per-state descriptive statistics and test battery; subseries keep
    their temporal order even though each concatenates regime segments."""

    stats: dict
    tests: dict
    warnings: tuple


def subseries_report(series, assignment) -> SubseriesReport:
    """Split a series by assigned state and run describe plus the battery on
    each subseries."""
    y = _values(series)
    z = np.asarray(assignment, dtype=np.int64)
    if len(z) != len(y):
        raise DataError(
            f"assignment length {len(z)} != series length {len(y)}"
        )
    stats_by_state: dict = {}
    tests_by_state: dict = {}
    warnings = []
    for state in (1, 2):
        sub = y[z == state]
        if sub.size == 0:
            warnings.append(f"state {state} is empty; skipped")
            continue
        try:
            stats_by_state[state] = describe(sub)
        except DataError as exc:
            warnings.append(f"state {state} descriptive stats skipped: {exc}")
        reports = []
        for runner in (
            df_test,
            lambda s: adf_test(s, p=7, drift=True),
            lambda s: lbq_test(s, p=10),
            lambda s: kpss_test(s, trend=True),
            vr_test,
            jb_test,
        ):
            try:
                reports.append(runner(sub))
            except DataError as exc:
                warnings.append(f"state {state}: {exc}")
        if reports:
            tests_by_state[state] = reports
    warnings.append(
        "subseries are concatenations of regime segments treated as contiguous"
    )
    return SubseriesReport(
        stats=stats_by_state, tests=tests_by_state, warnings=tuple(warnings)
    )
