"""Panel estimators in closed demeaned-difference form.

After cross-sectionally demeaning each series (``demean``), the two-way
fixed-effects slope on a balanced panel is a plain ratio of sums over
differenced observations; no dummy variables are ever materialized.  All
estimators here share that structure:

``twfe``
    slope on ``x`` from least squares of ``y`` on ``x`` plus unit and period
    effects, computed from double-demeaned arrays (optionally after
    partialling out covariates observation-wise).
``fd``
    pooled gap-``k`` difference estimator with per-start-period intercepts.
``twfe_two_period``
    two-way estimator restricted to a single pair of periods.
``twfe_multivariate``
    several regressors at once, solved from pairwise-difference normal
    equations.
``twfe_iv``
    instrumental-variable analogue: ratio of instrument cross moments.

Every estimator raises :class:`NoIdentifyingVariation` instead of dividing
by a degenerate denominator; "degenerate" means at most ``1e-12`` times the
natural squared scale of the treatment series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoIdentifyingVariation
from .inference import StackedRegression, cluster_robust_se, stack_differences
from .numerics import fwl_residualize, independent_columns
from .panel import BalancedPanel, demean

#: An estimator's denominator below this multiple of the treatment's squared
#: scale is treated as zero identifying variation.
DEGENERACY_TOL = 1e-12


@dataclass
class Estimate:
    """A point estimate together with the variation that identifies it.

    Attributes
    ----------
    beta : float or ndarray
        Point estimate (vector only for the multivariate estimator).
    se : float or None
        Cluster-robust standard error when requested, else ``None``.
    n_units : int
    periods_used : str
        Human-readable description of the differences entering the estimate.
    denominator : float
        Denominator of the ratio that produced ``beta`` (for the
        multivariate estimator: smallest eigenvalue of the normal-equation
        matrix).  Reported so callers can judge how thin the identifying
        variation is.
    """

    beta: float | np.ndarray
    se: float | None
    n_units: int
    periods_used: str
    denominator: float


def _within(values: np.ndarray) -> np.ndarray:
    """Remove per-unit (row) means; second pass tightens the row sums."""
    w = values - values.mean(axis=1, keepdims=True)
    w -= w.mean(axis=1, keepdims=True)
    return w


def _variation_scale(panel: BalancedPanel, var: str) -> float:
    v = panel.values(var)
    centered = v - v.mean()
    return float(np.sum(centered * centered))


def two_way_residual(
    panel: BalancedPanel, var: str, covariates: Sequence[str] | None = None
) -> np.ndarray:
    """Residual of ``var`` after the two-way projection, as a units x periods array.

    With no covariates this is the double-demeaned series (cross-sectional
    demeaning followed by removal of unit means), which on a balanced panel
    equals the residual from regressing ``var`` on unit and period
    indicators.  Covariates, when given, are themselves double-demeaned and
    then partialled out observation-wise.
    """
    within = _within(demean(panel, var).values)
    if not covariates:
        return within
    controls = np.column_stack(
        [_within(demean(panel, c).values).ravel() for c in covariates]
    )
    return fwl_residualize(within.ravel(), controls).reshape(within.shape)


def _check_denominator(den: float, scale: float, message: str) -> None:
    if scale == 0.0 or den <= DEGENERACY_TOL * scale:
        raise NoIdentifyingVariation(message)


def twfe(
    panel: BalancedPanel,
    y: str,
    x: str,
    covariates: Sequence[str] | None = None,
    se: bool = False,
) -> Estimate:
    """Two-way fixed-effects slope on ``x``.

    Equals the coefficient on ``x`` from least squares of ``y`` on ``x``,
    unit indicators, and period indicators (plus ``covariates`` if given),
    but is computed in closed form from demeaned arrays.
    """
    rx = two_way_residual(panel, x, covariates)
    ry = two_way_residual(panel, y, covariates)
    den = float(np.sum(rx * rx))
    _check_denominator(
        den,
        _variation_scale(panel, x),
        f"no identifying variation in '{x}' after the two-way transformation",
    )
    beta = float(np.sum(rx * ry)) / den
    t = panel.n_periods
    se_value = None
    if se:
        stacked = stack_differences(ry, rx, panel.cluster_id, range(1, t))
        se_value = cluster_robust_se(stacked)
    return Estimate(
        beta=beta,
        se=se_value,
        n_units=panel.n_units,
        periods_used=f"all periods, gaps 1-{t - 1}" if t > 2 else "all periods, gap 1",
        denominator=den,
    )


def fd(
    panel: BalancedPanel, y: str, x: str, k: int, se: bool = False
) -> Estimate:
    """Pooled gap-``k`` difference estimator with per-start-period intercepts.

    Demeaning each series cross-sectionally before differencing is exactly
    equivalent to giving every start period its own intercept in a stacked
    difference regression.
    """
    k = int(k)
    if not 1 <= k <= panel.n_periods - 1:
        raise NoIdentifyingVariation(
            f"gap must satisfy 1 <= k <= {panel.n_periods - 1}, got {k}"
        )
    xt = demean(panel, x).values
    yt = demean(panel, y).values
    dx = xt[:, k:] - xt[:, :-k]
    dy = yt[:, k:] - yt[:, :-k]
    den = float(np.sum(dx * dx))
    _check_denominator(
        den,
        _variation_scale(panel, x),
        f"no identifying variation in '{x}' at gap {k}",
    )
    beta = float(np.sum(dx * dy)) / den
    se_value = None
    if se:
        stacked = stack_differences(yt, xt, panel.cluster_id, [k])
        se_value = cluster_robust_se(stacked)
    return Estimate(
        beta=beta,
        se=se_value,
        n_units=panel.n_units,
        periods_used=f"gap {k} ({panel.n_periods - k} start periods)",
        denominator=den,
    )


def twfe_two_period(
    panel: BalancedPanel, y: str, x: str, t: int, s: int
) -> Estimate:
    """Two-way estimator using only the period pair ``(t, s)`` with ``s > t``."""
    if not s > t:
        raise ValueError(f"need s > t, got pair ({t}, {s})")
    ti = panel.period_index(t)
    si = panel.period_index(s)
    xt = demean(panel, x).values
    yt = demean(panel, y).values
    dx = xt[:, si] - xt[:, ti]
    dy = yt[:, si] - yt[:, ti]
    den = float(dx @ dx)
    scale = float(xt[:, ti] @ xt[:, ti] + xt[:, si] @ xt[:, si])
    _check_denominator(
        den,
        scale,
        f"no identifying variation in '{x}' for period pair ({t}, {s})",
    )
    beta = float(dx @ dy) / den
    return Estimate(
        beta=beta,
        se=None,
        n_units=panel.n_units,
        periods_used=f"pair ({t}, {s})",
        denominator=den,
    )


def twfe_multivariate(
    panel: BalancedPanel, y: str, xs: Sequence[str]
) -> Estimate:
    """Two-way fixed-effects coefficients on several regressors at once.

    Solves the normal equations accumulated over all period pairs of the
    cross-sectionally demeaned regressors; on a balanced panel this matches
    the dummy-variable regression of ``y`` on all of ``xs`` plus unit and
    period indicators.  ``beta`` is a vector aligned with ``xs``;
    ``denominator`` reports the smallest eigenvalue of the normal-equation
    matrix.
    """
    names = list(xs)
    if not names:
        raise ValueError("need at least one regressor")
    stack = np.stack([demean(panel, name).values for name in names], axis=-1)
    yt = demean(panel, y).values
    n, t, p = stack.shape

    design = np.column_stack(
        [_within(stack[:, :, j]).ravel() for j in range(p)]
    )
    try:
        _, dependent = independent_columns(design)
    except NoIdentifyingVariation:
        raise NoIdentifyingVariation(
            "no identifying variation in any regressor after the two-way "
            "transformation"
        ) from None
    if dependent:
        bad = ", ".join(f"'{names[j]}'" for j in dependent)
        raise NoIdentifyingVariation(
            f"collinear regressors after the two-way transformation: {bad}"
        )

    a = np.zeros((p, p))
    b = np.zeros(p)
    for ti in range(t - 1):
        for si in range(ti + 1, t):
            d = stack[:, si, :] - stack[:, ti, :]
            a += d.T @ d
            b += d.T @ (yt[:, si] - yt[:, ti])
    beta = np.linalg.solve(a, b)
    smallest = float(np.linalg.eigvalsh(a)[0])
    return Estimate(
        beta=beta,
        se=None,
        n_units=n,
        periods_used=f"all periods, gaps 1-{t - 1}",
        denominator=smallest,
    )


def twfe_iv(panel: BalancedPanel, y: str, x: str, z: str) -> Estimate:
    """Instrumental-variable two-way estimator with instrument ``z``.

    Ratio of pairwise instrument cross moments: the sum over period pairs of
    demeaned instrument differences times outcome differences, over the same
    with treatment differences.  Matches two-stage least squares with unit
    and period indicators in both stages.
    """
    xt = demean(panel, x).values
    yt = demean(panel, y).values
    zt = demean(panel, z).values
    t = panel.n_periods
    num = den = xvar = zvar = 0.0
    for k in range(1, t):
        dxk = xt[:, k:] - xt[:, :-k]
        dzk = zt[:, k:] - zt[:, :-k]
        dyk = yt[:, k:] - yt[:, :-k]
        num += float(np.sum(dzk * dyk))
        den += float(np.sum(dzk * dxk))
        xvar += float(np.sum(dxk * dxk))
        zvar += float(np.sum(dzk * dzk))
    # Guard the difference sums against the raw variation of each series
    # before forming their Cauchy-Schwarz product: a purely additive series
    # leaves only roundoff in the differences, which would otherwise shrink
    # the comparison scale along with the denominator.
    _check_denominator(
        xvar,
        t * _variation_scale(panel, x),
        f"no identifying variation in '{x}' after the two-way transformation",
    )
    _check_denominator(
        zvar,
        t * _variation_scale(panel, z),
        f"instrument '{z}' is irrelevant for '{x}' under the two-way "
        f"transformation",
    )
    scale = float(np.sqrt(xvar * zvar))
    if abs(den) <= DEGENERACY_TOL * scale:
        raise NoIdentifyingVariation(
            f"instrument '{z}' is irrelevant for '{x}' under the two-way "
            f"transformation"
        )
    return Estimate(
        beta=num / den,
        se=None,
        n_units=panel.n_units,
        periods_used=f"all periods, gaps 1-{t - 1}" if t > 2 else "all periods, gap 1",
        denominator=den,
    )
