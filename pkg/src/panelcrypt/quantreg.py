"""Quantile (LAD) regression with kernel-based inference.

The solver is a primal-dual interior-point method on the bounded-dual LP of
the check-loss problem (Frisch-Newton with Mehrotra correction).  Sparsity
is estimated from residuals with an Epanechnikov kernel, Hall-Sheather
bandwidth and Rankit plotting positions; coefficient covariances use the
heteroskedasticity-robust (Huber-White) sandwich.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .base import (
    BaseEstimator,
    ConvergenceError,
    as_float_array,
    check_consistent_length,
)
from .estimators import chi2_survival, qr_solve

GAP_TOL = 1e-9
MAX_ITER = 200
_STEP_DAMP = 0.9995


def check_loss(residuals, tau):
    """Asymmetric absolute loss sum(u * (tau - 1{u<0}))."""
    u = np.asarray(residuals, dtype=float)
    return float(np.sum(u * (tau - (u < 0.0))))


def rankit_positions(n):
    """Plotting positions (i - 3/8) / (n + 1/4), i = 1..n."""
    return (np.arange(1, n + 1) - 0.375) / (n + 0.25)


def rankit_quantile(values, tau):
    """Empirical quantile interpolated at Rankit plotting positions."""
    xs = np.sort(np.asarray(values, dtype=float))
    return float(np.interp(tau, rankit_positions(len(xs)), xs))


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u**2), 0.0)


def hall_sheather_bandwidth(tau, n, size=0.05):
    """Plug-in bandwidth in probability units at significance ``size``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    if n < 2:
        raise ValueError("need n >= 2")
    z_alpha = ndtri(1.0 - size / 2.0)
    z_tau = ndtri(tau)
    density = math.exp(-0.5 * z_tau**2) / math.sqrt(2.0 * math.pi)
    return float(
        n ** (-1.0 / 3.0)
        * z_alpha ** (2.0 / 3.0)
        * (1.5 * density**2 / (2.0 * z_tau**2 + 1.0)) ** (1.0 / 3.0)
    )


def _clamped_bandwidth(tau, n, size):
    """Hall-Sheather bandwidth, shrunk so [tau-h, tau+h] stays inside (0, 1)."""
    h = hall_sheather_bandwidth(tau, n, size)
    clamped = False
    limit = min(tau, 1.0 - tau)
    if h >= limit:
        h = limit * (1.0 - 1e-9)
        clamped = True
    return h, clamped


def _median_interval_quantile(y, tau):
    """Check-loss minimizer with the midpoint convention on flat optima."""
    ys = np.sort(np.asarray(y, dtype=float))
    n = len(ys)
    m = n * tau
    j = round(m)
    if abs(m - j) < 1e-9 and 1 <= j <= n - 1:
        return 0.5 * (ys[j - 1] + ys[j])
    return float(ys[min(max(math.ceil(m - 1e-9), 1), n) - 1])


# ---------------------------------------------------------------------------
# interior-point solver


def _bound(v, dv):
    """Largest multiple of dv that keeps v positive."""
    neg = dv < 0
    if not neg.any():
        return np.inf
    return (-v[neg] / dv[neg]).min()


def _solve_lp(X, y, tau, max_iter=MAX_ITER, gap_tol=GAP_TOL):
    """Frisch-Newton interior point on the bounded dual of the check-loss LP.

    Dual: max y'a subject to X'a = (1 - tau) X'1 and a in [0, 1]^n; the
    equality multipliers at the optimum are the negative regression
    coefficients.
    """
    n, k = X.shape
    A = X.T
    c = -y
    x = np.full(n, 1.0 - tau)
    s = 1.0 - x
    b = A @ x

    yy = np.linalg.lstsq(A.T, c, rcond=None)[0]
    r = c - A.T @ yy
    r = r + 0.001 * (r == 0.0)
    z = np.where(r > 0, r, 0.0)
    w = z - r
    gap = c @ x - yy @ b + w.sum()

    it = 0
    while gap > gap_tol and it < max_iter:
        it += 1
        q = 1.0 / (z / x + w / s)
        r = z - w
        qa = q[:, None] * A.T
        M = A @ qa
        rhs = A @ (q * r)
        dy = np.linalg.solve(M, rhs)
        dx = q * (A.T @ dy - r)
        ds = -dx
        dz = -z * (1.0 + dx / x)
        dw = -w * (1.0 + ds / s)

        fp = min(_STEP_DAMP * min(_bound(x, dx), _bound(s, ds)), 1.0)
        fd = min(_STEP_DAMP * min(_bound(w, dw), _bound(z, dz)), 1.0)

        if min(fp, fd) < 1.0:
            mu = z @ x + w @ s
            g = (z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            dxdz = dx * dz
            dsdw = ds * dw
            xinv = 1.0 / x
            sinv = 1.0 / s
            xi = mu * (xinv - sinv)
            dy = np.linalg.solve(M, rhs + A @ (q * (dxdz - dsdw - xi)))
            dx = q * (A.T @ dy + xi - r - dxdz + dsdw)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz
            dw = mu * sinv - w - sinv * w * ds - dsdw
            fp = min(_STEP_DAMP * min(_bound(x, dx), _bound(s, ds)), 1.0)
            fd = min(_STEP_DAMP * min(_bound(w, dw), _bound(z, dz)), 1.0)

        x = x + fp * dx
        s = s + fp * ds
        yy = yy + fd * dy
        z = z + fd * dz
        w = w + fd * dw
        gap = c @ x - yy @ b + w.sum()

    if gap > gap_tol:
        raise ConvergenceError(
            f"interior-point solver did not converge in {max_iter} iterations "
            f"(gap {gap:.3e})"
        )
    return -yy, it


def fit_quantile_coefficients(X, y, tau, max_iter=MAX_ITER, gap_tol=GAP_TOL):
    """Coefficients minimizing the check loss; midpoint convention for the
    flat optimum of an intercept-only fit."""
    X = as_float_array(X, "X", ndim=2)
    y = as_float_array(y, "y")
    check_consistent_length(X=X, y=y)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    n, k = X.shape
    if n <= k:
        raise ValueError(f"need more rows ({n}) than columns ({k})")
    qr_solve(X, y)  # full-column-rank check with named-column diagnostics upstream
    if k == 1 and np.ptp(X[:, 0]) == 0.0:
        level = X[0, 0]
        if level == 0.0:
            raise ValueError("intercept-only design with a zero column")
        return np.array([_median_interval_quantile(y, tau) / level]), 0
    return _solve_lp(X, y, tau, max_iter=max_iter, gap_tol=gap_tol)


# ---------------------------------------------------------------------------
# inference


def sparsity_hall_sheather(residuals, tau, size=0.05):
    """Kernel-smoothed derivative of the residual quantile function at ``tau``.

    Epanechnikov kernel over Rankit plotting positions with the Hall-Sheather
    bandwidth; returns ``(sparsity, bandwidth, clamped)``.
    """
    u = np.sort(np.asarray(residuals, dtype=float))
    n = len(u)
    if n < 10:
        raise ValueError(f"need at least 10 residuals, got {n}")
    h, clamped = _clamped_bandwidth(tau, n, size)
    p = rankit_positions(n)
    midpoints = 0.5 * (p[:-1] + p[1:])
    spacings = np.diff(u)
    dp = np.diff(p)
    weights = _epanechnikov((midpoints - tau) / h)
    total = weights @ dp
    if total <= 0.0:
        nearest = int(np.argmin(np.abs(midpoints - tau)))
        weights = np.zeros_like(weights)
        weights[nearest] = 1.0
        total = dp[nearest]
    sparsity = float((weights @ spacings) / total)
    if sparsity <= 0.0:
        raise ValueError("degenerate residual distribution: zero quantile density spacing")
    return sparsity, h, clamped


def sandwich_cov(X, residuals, tau, size=0.05):
    """Huber-White sandwich tau(1-tau) B^-1 (X'X) B^-1 with a kernel
    density-weighted bread B = sum f_i x_i x_i'."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float)
    n = len(u)
    h, _ = _clamped_bandwidth(tau, n, size)
    lo = rankit_quantile(u, tau - h)
    hi = rankit_quantile(u, tau + h)
    c = hi - lo
    if c <= 0.0:
        raise ValueError("degenerate residuals: zero bandwidth in residual units")
    f = _epanechnikov(u / c) / c
    bread = (X * f[:, None]).T @ X
    try:
        bread_inv = np.linalg.inv(bread)
    except np.linalg.LinAlgError:
        raise ValueError("singular bread matrix in the quantile sandwich") from None
    cov = tau * (1.0 - tau) * bread_inv @ (X.T @ X) @ bread_inv
    return (cov + cov.T) / 2.0


@dataclass
class QuantileFit:
    """Per-tau estimate bundle."""

    tau: float
    columns: list
    params: np.ndarray
    cov: np.ndarray
    nobs: int
    check_loss: float
    restricted_loss: float
    pseudo_r2: float
    sparsity: float
    hall_sheather_bw: float
    quantile_dependent: float
    quasi_lr_stat: float
    quasi_lr_pvalue: float
    residuals: np.ndarray
    iterations: int
    flags: list = field(default_factory=list)

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def coef(self, name):
        return float(self.params[self.columns.index(name)])

    def se_of(self, name):
        return float(self.se[self.columns.index(name)])


def pseudo_r2(fit_loss, restricted_loss):
    """Koenker-Machado 1 - L_full / L_restricted."""
    if restricted_loss == 0.0:
        if fit_loss == 0.0:
            raise ValueError("pseudo R2 undefined: zero restricted and unrestricted loss")
        raise ValueError("restricted loss is zero but unrestricted loss is not")
    return 1.0 - fit_loss / restricted_loss


def quasi_lr(full, restricted):
    """Quasi-likelihood-ratio test of a nested quantile fit.

    statistic = 2 (L_r - L_f) / (tau (1 - tau) sparsity), chi-square with
    df equal to the difference in column counts.  Identical models yield
    (0, 1).
    """
    if abs(full.tau - restricted.tau) > 1e-12 or full.nobs != restricted.nobs:
        raise ValueError("fits must share tau and data")
    df = len(full.columns) - len(restricted.columns)
    if df < 0:
        raise ValueError("restricted model must not have more columns than the full model")
    excess = restricted.check_loss - full.check_loss
    if excess < -1e-8 * max(1.0, abs(full.check_loss)):
        raise ValueError(
            "restricted loss below full loss: models do not appear to be nested"
        )
    excess = max(excess, 0.0)
    stat = 2.0 * excess / (full.tau * (1.0 - full.tau) * full.sparsity)
    if df == 0:
        if stat > 1e-8:
            raise ValueError("models share a column count but differ in fit")
        return 0.0, 1.0
    return stat, chi2_survival(stat, df)


class PanelQuantile(BaseEstimator):
    """Pooled quantile regression estimator for one tau level."""

    def __init__(self, tau=0.5, size=0.05, max_iter=MAX_ITER, gap_tol=GAP_TOL):
        self.tau = tau
        self.size = size
        self.max_iter = max_iter
        self.gap_tol = gap_tol

    def fit(self, design):
        X, y = design.matrix, design.response
        params, iterations = fit_quantile_coefficients(
            X, y, self.tau, max_iter=self.max_iter, gap_tol=self.gap_tol
        )
        residuals = y - X @ params
        loss = check_loss(residuals, self.tau)
        spread = float(np.ptp(residuals))
        scale = max(1.0, float(np.abs(y).max()))
        degenerate = spread <= 1e-12 * scale
        if degenerate:
            # residuals carry no dispersion (for example an exact fit);
            # report the point estimates without a covariance
            sparsity = float("nan")
            bw, _ = _clamped_bandwidth(self.tau, design.nobs, self.size)
            clamped = False
            cov = np.zeros((X.shape[1], X.shape[1]))
        else:
            sparsity, bw, clamped = sparsity_hall_sheather(residuals, self.tau, self.size)
            cov = sandwich_cov(X, residuals, self.tau, self.size)

        restricted_center = _median_interval_quantile(y, self.tau)
        restricted_loss = check_loss(y - restricted_center, self.tau)
        flags = ["bandwidth_clamped"] if clamped else []
        if degenerate:
            flags.append("degenerate_residuals")

        result = QuantileFit(
            tau=self.tau,
            columns=list(design.columns),
            params=params,
            cov=cov,
            nobs=design.nobs,
            check_loss=loss,
            restricted_loss=restricted_loss,
            pseudo_r2=pseudo_r2(loss, restricted_loss),
            sparsity=sparsity,
            hall_sheather_bw=bw,
            quantile_dependent=rankit_quantile(y, self.tau),
            quasi_lr_stat=0.0,
            quasi_lr_pvalue=1.0,
            residuals=residuals,
            iterations=iterations,
            flags=flags,
        )
        if len(design.columns) > 1 and not degenerate:
            restricted = QuantileFit(
                tau=self.tau,
                columns=["const"],
                params=np.array([restricted_center]),
                cov=np.zeros((1, 1)),
                nobs=design.nobs,
                check_loss=restricted_loss,
                restricted_loss=restricted_loss,
                pseudo_r2=0.0,
                sparsity=sparsity,
                hall_sheather_bw=bw,
                quantile_dependent=restricted_center,
                quasi_lr_stat=0.0,
                quasi_lr_pvalue=1.0,
                residuals=y - restricted_center,
                iterations=0,
            )
            result.quasi_lr_stat, result.quasi_lr_pvalue = quasi_lr(result, restricted)
        self.result_ = result
        self.coef_ = params
        self.cov_ = cov
        return self
