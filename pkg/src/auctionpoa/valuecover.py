"""Value covering: turning a revenue-covering parameter into welfare bounds."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError, EmptyBidderSet, NonPositiveMu
from .interim import InterimCurves

DEFAULT_VALUE_POINTS = 200
VALUE_CAP_FACTOR = 10.0
_GOLDEN = (math.sqrt(5) - 1) / 2


def rho(mu: float) -> float:
    """Price of anarchy bound mu / (1 - exp(-mu)) for a mu-revenue-covered auction."""
    if not mu > 0 or not math.isfinite(mu):
        raise NonPositiveMu(f"mu must be positive and finite, got {mu!r}")
    if mu < 1e-8:
        return 1.0 + mu / 2.0
    return mu / -math.expm1(-mu)


def _envelope_prices(alloc, pay):
    """Values at which the utility-maximizing grid bid changes.

    The maximizer of ``x(b) - p(b)/v`` over the grid moves between vertices
    of the upper concave hull of the points (p, x); the switch from one
    vertex to the next happens at the marginal price dp/dx.
    """
    pts = []
    for p, x in zip(pay, alloc):
        if pts and x <= pts[-1][1]:
            continue
        while pts and p <= pts[-1][0]:
            pts.pop()
        pts.append((p, x))
    hull = []
    for p, x in pts:
        while len(hull) >= 2:
            (p1, x1), (p2, x2) = hull[-2], hull[-1]
            if (x2 - x1) * (p - p1) <= (x - x1) * (p2 - p1):
                hull.pop()
            else:
                break
        hull.append((p, x))
    return np.array([(p2 - p1) / (x2 - x1) for (p1, x1), (p2, x2) in zip(hull, hull[1:])])


def default_value_cap(curves: InterimCurves):
    with np.errstate(divide="ignore", invalid="ignore"):
        ppc = np.where(curves.alloc > 0, curves.pay / curves.alloc, np.nan)
    top = np.nanmax(ppc) if np.isfinite(ppc).any() else 0.0
    return VALUE_CAP_FACTOR * top if top > 0 else curves.grid.cap


def value_grid(curves: InterimCurves, value_cap=None, points=DEFAULT_VALUE_POINTS):
    """Per-bidder candidate values on (0, value_cap].

    A geometric grid from the cheapest positive price per unit up to the cap,
    joined with every bidder's envelope switch prices below the cap; the
    minimum in `lambda_mu1` over this set equals the minimum over the whole
    interval.
    """
    cap = default_value_cap(curves) if value_cap is None else float(value_cap)
    with np.errstate(divide="ignore", invalid="ignore"):
        ppc = np.where(curves.alloc > 0, curves.pay / curves.alloc, np.nan)
    pos = ppc[np.isfinite(ppc) & (ppc > 0)]
    lo = float(pos.min()) if len(pos) else cap * 1e-3
    lo = min(lo, cap)
    base = np.geomspace(lo, cap, points) if points > 1 else np.array([cap])
    base[-1] = cap
    grids = []
    for i in range(len(curves.bidder_ids)):
        extra = _envelope_prices(curves.alloc[i], curves.pay[i])
        extra = extra[(extra > 0) & (extra <= cap)]
        grids.append(np.unique(np.concatenate([base, extra])))
    return grids, cap


def lambda_mu1(curves: InterimCurves, thresholds, mu, values) -> float:
    """Smallest value-covering parameter at the maximum marginal allocation.

    For every allocated bidder and candidate value v this is
    ``max_b [mu (v x(b) - p(b)) + T(xbar)] / (v xbar)``; the result is the
    minimum over bidders and values. `values` is one array shared by all
    bidders or a list with one array per bidder.
    """
    if not mu > 0:
        raise NonPositiveMu(f"mu must be positive, got {mu!r}")
    best = math.inf
    for i, tc in enumerate(thresholds):
        if tc is None:
            continue
        v = np.asarray(values[i] if isinstance(values, list) else values, dtype=float)
        if not len(v) or np.any(v <= 0):
            raise ValueError("candidate values must be positive and non-empty")
        x, p = curves.alloc[i], curves.pay[i]
        util = (v[:, None] * x[None, :] - p[None, :]).max(axis=1)
        ratio = (mu * util + tc.total) / (v * tc.max_alloc)
        best = min(best, float(ratio.min()))
    if best == math.inf:
        raise EmptyBidderSet("no bidder is ever allocated")
    return best


def _concentration_ratio(v, mu, k):
    u = v - 1.0
    thresh = 1.0 + u * np.log(u / (v - (1.0 - 1.0 / k)))
    return v / (u + thresh / mu)


def _golden_max(f, a, b, rtol=1e-6, max_iter=200):
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * max(1.0, abs(c)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return max(fc, fd)


def lambda_concentration(mu: float, k: float) -> float:
    """Price of anarchy when every price per unit is within a factor (1 - 1/k)
    of the price of the maximum allocation.

    Worst case over values v > 1 of the ratio between value and utility plus
    discounted threshold for the extremal price-per-unit allocation rule,
    floored at 1. Search runs over log(v - 1): a coarse scan, then golden
    section around the best scan point.
    """
    if not (k >= 1) or not math.isfinite(k):
        raise DomainError(f"k must be >= 1, got {k!r}")
    if not mu > 0 or not math.isfinite(mu):
        raise DomainError(f"mu must be positive, got {mu!r}")
    lo, hi = math.log(1e-9), math.log(1e6 - 1)
    s = np.linspace(lo, hi, 401)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = _concentration_ratio(1.0 + np.exp(s), mu, k)
    j = int(np.nanargmax(r))
    a, b = s[max(j - 1, 0)], s[min(j + 1, len(s) - 1)]
    f = lambda t: float(_concentration_ratio(1.0 + math.exp(t), mu, k))  # noqa: E731
    best = max(float(r[j]), _golden_max(f, a, b))
    return max(1.0, best)


def crude_concentration_lambda(mu: float, k: float) -> float:
    """Value-covering parameter mu (1 - 1/k) / max(1, mu) from the direct argument."""
    if not (k >= 1):
        raise DomainError(f"k must be >= 1, got {k!r}")
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu!r}")
    return mu * (1.0 - 1.0 / k) / max(1.0, mu)


def concentration_k(thresholds) -> Optional[float]:
    """Largest k such that every tau is at least (1 - 1/k) of its top value."""
    ratios = [tc.heights[0] / tc.heights[-1] for tc in thresholds
              if tc is not None and tc.heights[-1] > 0]
    if not ratios:
        return None
    worst = min(ratios)
    return math.inf if worst >= 1 else 1.0 / (1.0 - worst)


@dataclass(frozen=True)
class ValueCoverResult:
    mu: float
    rho: float
    lambda1: float
    value_cap: float
    value_points: int
    lambda_conc: Optional[float] = None
    k: Optional[float] = None

    @property
    def epoa1(self):
        return self.mu / self.lambda1

    @property
    def bound(self):
        """min(rho(mu), mu / lambda1), floored at 1."""
        return max(1.0, min(self.rho, self.epoa1))


def value_cover(curves: InterimCurves, thresholds, mu, value_cap=None,
                value_points=DEFAULT_VALUE_POINTS) -> ValueCoverResult:
    grids, cap = value_grid(curves, value_cap, value_points)
    lam = lambda_mu1(curves, thresholds, mu, grids)
    k = concentration_k(thresholds)
    conc = None
    if k is not None and mu >= 1:
        conc = lambda_concentration(mu, min(k, 1e12))
    return ValueCoverResult(mu, rho(mu), lam, cap, value_points, conc, k)
