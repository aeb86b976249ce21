"""Unit-root tests, cross-sectional dependence tests, descriptive moments
and pairwise-complete correlation matrices for the unbalanced panel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .estimators import chi2_survival

CADF_LOWER, CADF_UPPER = -6.19, 2.61

# MacKinnon (2010) response-surface critical values, intercept case, one
# variable: cv(T) = b0 + b1/T + b2/T^2 + b3/T^3.
ADF_CONSTANT_CV = {
    0.01: (-3.43035, -6.5393, -16.786, -79.433),
    0.05: (-2.86154, -2.8903, -4.234, -40.040),
    0.10: (-2.56677, -1.5384, -2.809, 0.0),
}

# CIPS critical values (intercept case), simulated under the independent
# random-walk null: 5,000 replications per (N, T) cell, CADF regressions with
# constant, lagged level, lagged cross-section average and its current
# difference (no augmentation).  Values are the 1% / 5% / 10% empirical
# quantiles of the CIPS statistic; used for significance stars only.
CIPS_CV_N = (5, 10, 15, 20, 30, 50)
CIPS_CV_T = (50, 100, 200, 500, 1000, 2000)
CIPS_CV_TABLE = {
    (5, 50): (-2.852, -2.546, -2.382),
    (5, 100): (-2.861, -2.540, -2.368),
    (5, 200): (-2.837, -2.527, -2.391),
    (5, 500): (-2.833, -2.529, -2.364),
    (5, 1000): (-2.828, -2.530, -2.375),
    (5, 2000): (-2.835, -2.532, -2.365),
    (10, 50): (-2.561, -2.335, -2.214),
    (10, 100): (-2.528, -2.324, -2.206),
    (10, 200): (-2.522, -2.320, -2.203),
    (10, 500): (-2.558, -2.337, -2.215),
    (10, 1000): (-2.549, -2.314, -2.214),
    (10, 2000): (-2.535, -2.328, -2.222),
    (15, 50): (-2.432, -2.239, -2.138),
    (15, 100): (-2.420, -2.247, -2.150),
    (15, 200): (-2.423, -2.243, -2.144),
    (15, 500): (-2.418, -2.246, -2.143),
    (15, 1000): (-2.430, -2.247, -2.147),
    (15, 2000): (-2.435, -2.252, -2.168),
    (20, 50): (-2.356, -2.195, -2.104),
    (20, 100): (-2.386, -2.205, -2.116),
    (20, 200): (-2.357, -2.213, -2.127),
    (20, 500): (-2.359, -2.204, -2.122),
    (20, 1000): (-2.367, -2.202, -2.120),
    (20, 2000): (-2.347, -2.205, -2.120),
    (30, 50): (-2.297, -2.164, -2.082),
    (30, 100): (-2.271, -2.147, -2.073),
    (30, 200): (-2.277, -2.154, -2.079),
    (30, 500): (-2.280, -2.161, -2.093),
    (30, 1000): (-2.264, -2.153, -2.082),
    (30, 2000): (-2.301, -2.164, -2.092),
    (50, 50): (-2.234, -2.116, -2.044),
    (50, 100): (-2.230, -2.116, -2.053),
    (50, 200): (-2.223, -2.114, -2.046),
    (50, 500): (-2.236, -2.121, -2.044),
    (50, 1000): (-2.247, -2.124, -2.058),
    (50, 2000): (-2.232, -2.118, -2.054),
}


def _adf_critical_values(nobs):
    out = {}
    for level, (b0, b1, b2, b3) in ADF_CONSTANT_CV.items():
        out[level] = b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
    return out


def _interp_axis(grid, value):
    """Clamped linear interpolation weights on a sorted grid."""
    grid = np.asarray(grid, dtype=float)
    if value <= grid[0]:
        return 0, 0, 1.0
    if value >= grid[-1]:
        return len(grid) - 1, len(grid) - 1, 1.0
    hi = int(np.searchsorted(grid, value))
    lo = hi - 1
    w = (grid[hi] - value) / (grid[hi] - grid[lo])
    return lo, hi, float(w)


def cips_critical_values(n_entities, nobs):
    """Bilinear interpolation of the simulated CIPS table on (N, T)."""
    if not CIPS_CV_TABLE:
        return None
    i0, i1, wi = _interp_axis(CIPS_CV_N, n_entities)
    j0, j1, wj = _interp_axis(CIPS_CV_T, nobs)
    out = {}
    for idx, level in enumerate((0.01, 0.05, 0.10)):
        v00 = CIPS_CV_TABLE[(CIPS_CV_N[i0], CIPS_CV_T[j0])][idx]
        v01 = CIPS_CV_TABLE[(CIPS_CV_N[i0], CIPS_CV_T[j1])][idx]
        v10 = CIPS_CV_TABLE[(CIPS_CV_N[i1], CIPS_CV_T[j0])][idx]
        v11 = CIPS_CV_TABLE[(CIPS_CV_N[i1], CIPS_CV_T[j1])][idx]
        out[level] = wi * (wj * v00 + (1 - wj) * v01) + (1 - wi) * (wj * v10 + (1 - wj) * v11)
    return out


def _stars(statistic, critical_values):
    if critical_values is None:
        return ""
    if statistic < critical_values[0.01]:
        return "***"
    if statistic < critical_values[0.05]:
        return "**"
    if statistic < critical_values[0.10]:
        return "*"
    return ""


@dataclass
class UnitRootResult:
    test: str                     # "adf" or "cips"
    statistic: float
    lags: object                  # int, or {entity: int} for CIPS
    deterministic: str
    nobs: int
    stars: str = ""
    critical_values: dict = None
    cadf_stats: dict = None       # entity -> CADF t-statistic
    truncated_statistic: float = None
    truncated_cadf: dict = None
    flags: list = field(default_factory=list)


@dataclass
class DependenceResult:
    name: str                     # BP-LM, scaled-LM, bias-corrected-LM, Pesaran-CD
    statistic: float
    p_value: float
    pair_count: int
    excluded_pairs: list = field(default_factory=list)


@dataclass
class DescribeRow:
    mean: float
    median: float
    maximum: float
    minimum: float
    std_dev: float
    skewness: float
    kurtosis: float
    nobs: int
    flags: list = field(default_factory=list)


def _ols_tstat(X, y, coef_index):
    """Classical OLS t-ratio for one coefficient, plus fit diagnostics."""
    n, k = X.shape
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sigma2 = ssr / (n - k)
    var = sigma2 * np.linalg.inv(XtX)[coef_index, coef_index]
    return beta[coef_index] / math.sqrt(var), ssr, n, k


def _aic(ssr, nobs, n_params):
    return nobs * math.log(ssr / nobs) + 2.0 * n_params


def _adf_design(y, p):
    """Rows for the Dickey-Fuller regression with ``p`` lagged differences."""
    dy = np.diff(y)
    t = len(dy)
    rows = np.arange(p, t)
    cols = [np.ones(len(rows)), y[rows]]           # constant, y_{t-1}
    for j in range(1, p + 1):
        cols.append(dy[rows - j])
    X = np.column_stack(cols)
    return X, dy[rows]


def adf(series, max_lag=4, deterministic="constant"):
    """Augmented Dickey-Fuller test with a constant and AIC lag selection.

    The statistic is the t-ratio on the lagged level in
    Dy_t = a + rho y_{t-1} + sum_j phi_j Dy_{t-j} + e_t; stars use the
    MacKinnon (2010) response-surface critical values.
    """
    if deterministic != "constant":
        raise ValueError("only the constant deterministic case is supported")
    y = np.asarray(series, dtype=float)
    y = y[np.isfinite(y)]
    if len(y) <= max_lag + 3:
        raise ValueError(f"series too short ({len(y)}) for max_lag={max_lag}")
    if np.ptp(y) == 0.0:
        raise ValueError("zero-variance series")

    best_p, best_aic = 0, np.inf
    for p in range(0, max_lag + 1):
        # selection on the common sample implied by max_lag
        dy = np.diff(y)
        rows = np.arange(max_lag, len(dy))
        cols = [np.ones(len(rows)), y[rows]]
        for j in range(1, p + 1):
            cols.append(dy[rows - j])
        X = np.column_stack(cols)
        _, ssr, n, k = _ols_tstat(X, dy[rows], 1)
        aic = _aic(ssr, n, k)
        if aic < best_aic - 1e-12:
            best_aic, best_p = aic, p

    X, target = _adf_design(y, best_p)
    stat, _, nobs, _ = _ols_tstat(X, target, 1)
    cv = _adf_critical_values(nobs)
    return UnitRootResult(
        test="adf",
        statistic=float(stat),
        lags=best_p,
        deterministic="constant",
        nobs=nobs,
        stars=_stars(stat, cv),
        critical_values=cv,
    )


def _drop_collinear(columns, protected=2, tol=1e-8):
    """Keep a maximal independent column subset, preserving the first
    ``protected`` columns (constant and the lagged level)."""
    kept = list(columns[:protected])
    for col in columns[protected:]:
        basis = np.column_stack(kept)
        coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
        resid = col - basis @ coef
        if np.linalg.norm(resid) > tol * max(np.linalg.norm(col), 1.0):
            kept.append(col)
    return kept


def _cadf_stat(y, ybar_lag, dybar, max_lag):
    """CADF t-statistic for one entity with AIC-selected augmentation.

    Cross-section-average columns that are collinear with the entity's own
    regressors (for example when every entity carries the same series) are
    dropped, which reduces the regression to the plain ADF form.
    """
    dy = np.diff(y)
    t = len(dy)
    best_p, best_aic = 0, np.inf
    rows_sel = np.arange(max_lag, t)
    for p in range(0, max_lag + 1):
        cols = [np.ones(len(rows_sel)), y[rows_sel], ybar_lag[rows_sel], dybar[rows_sel]]
        for j in range(1, p + 1):
            cols.append(dybar[rows_sel - j])
            cols.append(dy[rows_sel - j])
        X = np.column_stack(_drop_collinear(cols))
        _, ssr, n, k = _ols_tstat(X, dy[rows_sel], 1)
        aic = _aic(ssr, n, k)
        if aic < best_aic - 1e-12:
            best_aic, best_p = aic, p

    rows = np.arange(best_p, t)
    cols = [np.ones(len(rows)), y[rows], ybar_lag[rows], dybar[rows]]
    for j in range(1, best_p + 1):
        cols.append(dybar[rows - j])
        cols.append(dy[rows - j])
    X = np.column_stack(_drop_collinear(cols))
    stat, _, nobs, _ = _ols_tstat(X, dy[rows], 1)
    return float(stat), best_p, nobs


def truncate_cadf(statistic, lower=CADF_LOWER, upper=CADF_UPPER):
    return float(min(max(statistic, lower), upper))


def cips(panel_values, max_lag=4, deterministic="constant", entity_labels=None):
    """Pesaran-style CIPS test: mean of per-entity CADF statistics.

    ``panel_values`` is an (N, T) array aligned on a common calendar with
    NaN marking missing observations; cross-section averages use whatever
    entities are present at each date.  The truncated variant clips each
    CADF statistic to [-6.19, 2.61] before averaging.
    """
    if deterministic != "constant":
        raise ValueError("only the constant deterministic case is supported")
    data = np.asarray(panel_values, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need an (N, T) array with at least 2 entities")
    n_entities, t_len = data.shape
    labels = list(entity_labels) if entity_labels is not None else list(range(n_entities))

    ybar = np.full(t_len, np.nan)
    has_data = np.isfinite(data).any(axis=0)
    ybar[has_data] = np.nanmean(data[:, has_data], axis=0)
    stats, lags, truncated = {}, {}, {}
    nobs_total = 0
    for i in range(n_entities):
        y = data[i]
        ok = np.isfinite(y)
        idx = np.flatnonzero(ok)
        if idx.size <= max_lag + 5:
            raise ValueError(
                f"entity {labels[i]}: too few observations ({idx.size}) for the CADF regression"
            )
        if not np.all(np.diff(idx) == 1):
            first, last = idx[0], idx[-1]
            if np.isfinite(y[first:last + 1]).all():
                idx = np.arange(first, last + 1)
            else:
                raise ValueError(f"entity {labels[i]}: interior gaps are not supported")
        seg = y[idx]
        ybar_seg = ybar[idx]
        if not np.isfinite(ybar_seg).all():
            raise ValueError("cross-section average undefined on part of the sample")
        ybar_lag = ybar_seg[:-1]
        dybar = np.diff(ybar_seg)
        stat, p, nobs = _cadf_stat(seg, ybar_lag, dybar, max_lag)
        stats[labels[i]] = stat
        lags[labels[i]] = p
        truncated[labels[i]] = truncate_cadf(stat)
        nobs_total += nobs

    cips_stat = float(np.mean(list(stats.values())))
    cips_trunc = float(np.mean(list(truncated.values())))
    cv = cips_critical_values(n_entities, nobs_total / n_entities)
    return UnitRootResult(
        test="cips",
        statistic=cips_stat,
        lags=lags,
        deterministic="constant",
        nobs=nobs_total,
        stars=_stars(cips_stat, cv),
        critical_values=cv,
        cadf_stats=stats,
        truncated_statistic=cips_trunc,
        truncated_cadf=truncated,
    )


def dependence_tests(panel_values, entity_labels=None):
    """Cross-sectional dependence battery on an (N, T) residual panel.

    Pairwise correlations use overlapping non-missing samples; pairs with
    fewer than 3 joint observations are excluded and reported.
    """
    data = np.asarray(panel_values, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need an (N, T) array with at least 2 entities")
    n = data.shape[0]
    labels = list(entity_labels) if entity_labels is not None else list(range(n))

    rhos, t_ij = [], []
    excluded = []
    for i in range(n):
        for j in range(i + 1, n):
            ok = np.isfinite(data[i]) & np.isfinite(data[j])
            t_pair = int(ok.sum())
            if t_pair < 3:
                excluded.append((labels[i], labels[j]))
                continue
            a = data[i, ok] - data[i, ok].mean()
            b = data[j, ok] - data[j, ok].mean()
            denom = math.sqrt(float(a @ a) * float(b @ b))
            if denom == 0.0:
                raise ValueError(
                    f"zero-variance overlap for pair ({labels[i]}, {labels[j]})"
                )
            rhos.append(float(a @ b) / denom)
            t_ij.append(t_pair)
    if not rhos:
        raise ValueError("no entity pair has at least 3 overlapping observations")
    rhos = np.asarray(rhos)
    t_ij = np.asarray(t_ij, dtype=float)
    pair_count = len(rhos)

    bp = float(np.sum(t_ij * rhos**2))
    scaled = float(np.sum(t_ij * rhos**2 - 1.0) / math.sqrt(n * (n - 1)))
    t_bar = float(t_ij.mean())
    bias_corrected = scaled - n / (2.0 * (t_bar - 1.0))
    cd = float(math.sqrt(2.0 / (n * (n - 1))) * np.sum(np.sqrt(t_ij) * rhos))

    def upper_normal(z):
        return float(1.0 - ndtr(z))

    results = [
        DependenceResult("BP-LM", bp, chi2_survival(bp, pair_count), pair_count, excluded),
        DependenceResult("scaled-LM", scaled, upper_normal(scaled), pair_count, excluded),
        DependenceResult(
            "bias-corrected-LM",
            bias_corrected,
            upper_normal(bias_corrected),
            pair_count,
            excluded,
        ),
        DependenceResult(
            "Pesaran-CD", cd, 2.0 * float(ndtr(-abs(cd))), pair_count, excluded
        ),
    ]
    return results


def describe(values, missing=None):
    """Moment summary with population (n-divisor) skewness and non-excess
    kurtosis; the standard deviation uses the sample (n-1) divisor."""
    x = np.asarray(values, dtype=float)
    if missing is not None:
        x = x[~np.asarray(missing, dtype=bool)]
    x = x[np.isfinite(x)]
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 non-missing values")
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered**2))
    flags = []
    if m2 == 0.0:
        skew = float("nan")
        kurt = float("nan")
        flags.append("degenerate")
    else:
        skew = float(np.mean(centered**3) / m2**1.5)
        kurt = float(np.mean(centered**4) / m2**2)
    return DescribeRow(
        mean=mean,
        median=float(np.median(x)),
        maximum=float(x.max()),
        minimum=float(x.min()),
        std_dev=float(x.std(ddof=1)),
        skewness=skew,
        kurtosis=kurt,
        nobs=n,
        flags=flags,
    )


def correlation_matrix(series_list, labels=None):
    """Pairwise-complete Pearson correlation matrix (unit diagonal)."""
    data = [np.asarray(s, dtype=float) for s in series_list]
    k = len(data)
    if k < 1:
        raise ValueError("need at least one series")
    length = len(data[0])
    if any(len(s) != length for s in data):
        raise ValueError("series must share a common calendar length")
    labels = list(labels) if labels is not None else [f"x{i}" for i in range(k)]
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            ok = np.isfinite(data[i]) & np.isfinite(data[j])
            if ok.sum() < 3:
                raise ValueError(
                    f"pair ({labels[i]}, {labels[j]}) has fewer than 3 joint observations"
                )
            a = data[i][ok] - data[i][ok].mean()
            b = data[j][ok] - data[j][ok].mean()
            denom = math.sqrt(float(a @ a) * float(b @ b))
            if denom == 0.0:
                raise ValueError(f"zero-variance series in pair ({labels[i]}, {labels[j]})")
            out[i, j] = out[j, i] = float(a @ b) / denom
    return out, labels
