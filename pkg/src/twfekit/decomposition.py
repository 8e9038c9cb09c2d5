"""Exact decompositions of the two-way fixed-effects estimate.

The two-way slope is an exact convex combination of simpler estimators, and
both decompositions here reproduce it to floating-point accuracy:

- by *gap*: one component per difference length ``k``, whose estimate is the
  pooled gap-``k`` difference estimator and whose weight is the share of
  squared demeaned gap-``k`` treatment variation;
- by *period pair*: one component per pair ``s > t``, whose estimate is the
  two-period estimator on ``(t, s)`` and whose weight is that pair's share
  of squared demeaned treatment differences.

Weights are nonnegative by construction and sum to one.  A component with
(numerically) zero treatment variation gets weight ``0.0`` and ``beta=None``:
it cannot move the aggregate, and its own estimate is undefined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoIdentifyingVariation
from .estimators import DEGENERACY_TOL, twfe
from .panel import BalancedPanel, demean


@dataclass(frozen=True)
class FdComponent:
    """One gap's contribution: pooled difference estimate and variance share."""

    gap: int
    beta: float | None
    weight: float
    n_obs: int


@dataclass(frozen=True)
class PairComponent:
    """One period pair's contribution.

    ``n_controls`` is only populated by the covariate-adjusted estimator,
    where each pair carries its own control count.
    """

    first: int
    second: int
    beta: float | None
    weight: float
    n_obs: int
    n_controls: int | None = None


@dataclass
class FdDecomposition:
    components: list[FdComponent]
    aggregate: float
    total_denominator: float


@dataclass
class PairwiseDecomposition:
    components: list[PairComponent]
    aggregate: float
    total_denominator: float


@dataclass
class WeightedSummary:
    """Weighted moments and quantiles of a decomposition's estimates.

    Quantiles use the left-continuous inverse CDF: the smallest component
    estimate whose cumulative weight reaches the requested level.
    """

    mean: float
    sd: float
    p5: float
    p25: float
    median: float
    p75: float
    p95: float
    n_components: int


@dataclass
class EquivalenceReport:
    """Three routes to the same number, and how far apart they landed."""

    twfe_beta: float
    fd_aggregate: float
    pairwise_aggregate: float
    max_rel_gap: float


def _demeaned_pair(panel: BalancedPanel, y: str, x: str):
    xt = demean(panel, x).values
    yt = demean(panel, y).values
    raw = panel.values(x)
    centered = raw - raw.mean()
    scale = float(np.sum(centered * centered))
    return xt, yt, scale


def fd_decomposition(panel: BalancedPanel, y: str, x: str) -> FdDecomposition:
    """Split the two-way estimate into pooled difference estimators by gap."""
    xt, yt, scale = _demeaned_pair(panel, y, x)
    t = panel.n_periods
    dens, nums, counts = [], [], []
    for k in range(1, t):
        dx = xt[:, k:] - xt[:, :-k]
        dy = yt[:, k:] - yt[:, :-k]
        dens.append(float(np.sum(dx * dx)))
        nums.append(float(np.sum(dx * dy)))
        counts.append(dx.size)
    total = float(sum(dens))
    if scale == 0.0 or total <= DEGENERACY_TOL * scale:
        raise NoIdentifyingVariation(
            f"no identifying variation in '{x}' after the two-way transformation"
        )
    components = []
    aggregate = 0.0
    for k, den, num, count in zip(range(1, t), dens, nums, counts):
        if den <= DEGENERACY_TOL * scale:
            components.append(
                FdComponent(gap=k, beta=None, weight=0.0, n_obs=count)
            )
            continue
        beta = num / den
        weight = den / total
        aggregate += weight * beta
        components.append(
            FdComponent(gap=k, beta=beta, weight=weight, n_obs=count)
        )
    return FdDecomposition(
        components=components, aggregate=aggregate, total_denominator=total
    )


def pairwise_decomposition(
    panel: BalancedPanel, y: str, x: str
) -> PairwiseDecomposition:
    """Split the two-way estimate into two-period estimators by period pair.

    Components are ordered lexicographically by (first, second) period label.
    """
    xt, yt, scale = _demeaned_pair(panel, y, x)
    t = panel.n_periods
    n = panel.n_units
    labels = panel.periods
    dens, nums, pairs = [], [], []
    for ti in range(t - 1):
        for si in range(ti + 1, t):
            dx = xt[:, si] - xt[:, ti]
            dy = yt[:, si] - yt[:, ti]
            dens.append(float(dx @ dx))
            nums.append(float(dx @ dy))
            pairs.append((labels[ti], labels[si]))
    total = float(sum(dens))
    if scale == 0.0 or total <= DEGENERACY_TOL * scale:
        raise NoIdentifyingVariation(
            f"no identifying variation in '{x}' after the two-way transformation"
        )
    components = []
    aggregate = 0.0
    for (first, second), den, num in zip(pairs, dens, nums):
        if den <= DEGENERACY_TOL * scale:
            components.append(
                PairComponent(
                    first=first, second=second, beta=None, weight=0.0, n_obs=n
                )
            )
            continue
        beta = num / den
        weight = den / total
        aggregate += weight * beta
        components.append(
            PairComponent(
                first=first, second=second, beta=beta, weight=weight, n_obs=n
            )
        )
    return PairwiseDecomposition(
        components=components, aggregate=aggregate, total_denominator=total
    )


def count_pairs(n_periods: int, k_min: int = 1, k_max: int | None = None) -> int:
    """Number of period pairs whose gap lies in ``[k_min, k_max]``.

    With the defaults this is ``n_periods * (n_periods - 1) / 2``, the total
    pair count.
    """
    t = int(n_periods)
    if t < 2:
        raise ValueError(f"need at least 2 periods, got {t}")
    if k_max is None:
        k_max = t - 1
    k_min, k_max = int(k_min), int(k_max)
    if not 1 <= k_min <= k_max <= t - 1:
        raise ValueError(
            f"need 1 <= k_min <= k_max <= {t - 1}, got [{k_min}, {k_max}]"
        )
    return sum(t - k for k in range(k_min, k_max + 1))


def weighted_summary(decomposition) -> WeightedSummary:
    """Weighted mean, spread, and quantiles of a decomposition's estimates.

    Accepts either decomposition flavour; components with zero weight (and
    hence undefined estimates) are excluded.  The weighted mean reproduces
    the decomposition's aggregate.
    """
    points = [
        (c.beta, c.weight)
        for c in decomposition.components
        if c.weight > 0.0 and c.beta is not None
    ]
    if not points:
        raise ValueError("no components with positive weight to summarize")
    betas = np.array([b for b, _ in points])
    weights = np.array([w for _, w in points])
    total = float(weights.sum())
    mean = float(weights @ betas) / total
    var = float(weights @ (betas - mean) ** 2) / total
    sd = float(np.sqrt(max(var, 0.0)))

    order = np.argsort(betas, kind="stable")
    sorted_betas = betas[order]
    cum = np.cumsum(weights[order])

    def quantile(q: float) -> float:
        idx = int(np.searchsorted(cum, q * total, side="left"))
        idx = min(idx, len(sorted_betas) - 1)
        return float(sorted_betas[idx])

    return WeightedSummary(
        mean=mean,
        sd=sd,
        p5=quantile(0.05),
        p25=quantile(0.25),
        median=quantile(0.50),
        p75=quantile(0.75),
        p95=quantile(0.95),
        n_components=len(points),
    )


def verify_equivalence(panel: BalancedPanel, y: str, x: str) -> EquivalenceReport:
    """Compute the two-way estimate three ways and report the largest gap.

    The gap is relative to the natural cancellation scale of the weighted
    averages — the larger of the estimate's magnitude and the weighted mean
    of absolute component estimates — so it stays meaningful when the
    estimate itself is near zero.
    """
    beta = twfe(panel, y, x).beta
    by_gap = fd_decomposition(panel, y, x)
    by_pair = pairwise_decomposition(panel, y, x)
    scales = [abs(beta)]
    for decomp in (by_gap, by_pair):
        scales.append(
            sum(
                c.weight * abs(c.beta)
                for c in decomp.components
                if c.beta is not None
            )
        )
    scale = max(max(scales), 1e-300)
    gap = max(
        abs(beta - by_gap.aggregate), abs(beta - by_pair.aggregate)
    ) / scale
    return EquivalenceReport(
        twfe_beta=beta,
        fd_aggregate=by_gap.aggregate,
        pairwise_aggregate=by_pair.aggregate,
        max_rel_gap=gap,
    )
