"""Revenue covering: expected revenue against bounds on the maximum total threshold."""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import AuctionDataset, total_revenue
from .exceptions import ZeroRevenue
from .thresholds import threshold_integral


@dataclass(frozen=True)
class CoveringResult:
    revenue: float
    tbar1: float
    tavg: float
    lb_t: float
    vprime: np.ndarray = field(repr=False)
    marginal_alloc: np.ndarray = field(repr=False)
    slot_positions: np.ndarray = field(repr=False, compare=False)

    @property
    def mu1(self):
        return self.tbar1 / self.revenue

    @property
    def mu_lb(self):
        return self.lb_t / self.revenue

    @property
    def mu_avg(self):
        return self.tavg / self.revenue


def revenue(ds: AuctionDataset) -> float:
    rev = total_revenue(ds)
    if rev <= 0:
        raise ZeroRevenue("expected revenue is zero; the covering parameter is undefined")
    return rev


def linearized_values(thresholds):
    """Per-unit value T(xbar)/xbar for each bidder, 0 for never-allocated bidders."""
    return np.array([0.0 if tc is None else tc.total / tc.max_alloc for tc in thresholds])


def greedy_policy(ds: AuctionDataset, vprime):
    """Per-record welfare-maximizing assignment for per-unit values `vprime`.

    Returns (per-record welfare, (T, n) slot index or -1). Reserves and
    mainline rules are ignored: they constrain the mechanism, not feasibility.
    """
    w = ds.qualities * np.asarray(vprime, dtype=float)[None, :]
    order = np.argsort(-w, axis=1, kind="stable")
    T, n = w.shape
    rows = np.arange(T)
    pos = np.full((T, n), -1, dtype=int)
    value = np.zeros(T)
    for j in range(min(n, ds.alphas.shape[1])):
        who = order[:, j]
        pos[rows, who] = j
        value += ds.alphas[:, j] * w[rows, who]
    return value, pos


def tbar1(ds: AuctionDataset, thresholds) -> float:
    value, _ = greedy_policy(ds, linearized_values(thresholds))
    return float(value.mean())


def marginal_allocation(ds: AuctionDataset, positions):
    T = ds.T
    a = np.where(positions >= 0, ds.alphas[np.arange(T)[:, None], np.maximum(positions, 0)], 0.0)
    return (a * ds.qualities).mean(axis=0)


def lb_t(ds: AuctionDataset, thresholds, positions=None) -> float:
    """True thresholds evaluated at the marginal allocation of the linearized-optimal policy."""
    if positions is None:
        _, positions = greedy_policy(ds, linearized_values(thresholds))
    xt = marginal_allocation(ds, positions)
    return float(sum(threshold_integral(tc, min(x, tc.max_alloc)) for tc, x in zip(thresholds, xt)
                     if tc is not None))


def fixed_assignment_weights(ds: AuctionDataset, thresholds):
    """(n, m) matrix of T_i(expected allocation of i when always in slot j)."""
    xs = np.stack([(ds.alphas[:, j:j + 1] * ds.qualities).mean(axis=0)
                   for j in range(ds.alphas.shape[1])], axis=1)
    w = np.zeros_like(xs)
    for i, tc in enumerate(thresholds):
        if tc is not None:
            w[i] = threshold_integral(tc, np.minimum(xs[i], tc.max_alloc))
    return w


def tavg(ds: AuctionDataset, thresholds) -> float:
    """Maximum total threshold over context-independent slot assignments."""
    w = fixed_assignment_weights(ds, thresholds)
    rows, cols = linear_sum_assignment(w, maximize=True)
    return float(w[rows, cols].sum())


def compute_covering(ds: AuctionDataset, thresholds) -> CoveringResult:
    rev = revenue(ds)
    vprime = linearized_values(thresholds)
    value, positions = greedy_policy(ds, vprime)
    xt = marginal_allocation(ds, positions)
    return CoveringResult(
        revenue=rev,
        tbar1=float(value.mean()),
        tavg=tavg(ds, thresholds),
        lb_t=lb_t(ds, thresholds, positions),
        vprime=vprime,
        marginal_alloc=xt,
        slot_positions=positions,
    )
