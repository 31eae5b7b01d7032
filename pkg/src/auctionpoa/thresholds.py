"""Inverse price-per-unit curves and their integrals (threshold functions)."""
from dataclasses import dataclass

import numpy as np

from .dataset import AuctionDataset
from .exceptions import NeverAllocated, OutOfRange
from .interim import InterimCurves, max_allocations, ppc_curve

RANGE_TOL = 1e-9


@dataclass(frozen=True)
class ThresholdCurve:
    """Step function tau on (z[k-1], z[k]] with value heights[k-1].

    ``z`` starts at 0 and ends at the largest achieved allocation;
    ``cumulative[k]`` is the integral of tau over [0, z[k]].
    """

    bidder_id: str
    z: np.ndarray
    heights: np.ndarray
    max_alloc: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        h = np.asarray(self.heights, dtype=float)
        if len(z) != len(h) + 1 or z[0] != 0 or not np.all(np.diff(z) > 0):
            raise ValueError("breakpoints must start at 0 and increase, one more than heights")
        if np.any(np.diff(h) < 0) or np.any(h < 0):
            raise ValueError("tau must be non-negative and non-decreasing")
        if z[-1] < self.max_alloc - RANGE_TOL:
            raise ValueError("breakpoints do not reach the maximum allocation")
        cum = np.concatenate([[0.0], np.cumsum(h * np.diff(z))])
        for arr in (z, h, cum):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "cumulative", cum)
        object.__setattr__(self, "max_alloc", float(self.max_alloc))

    @classmethod
    def from_levels(cls, allocs, ppcs, bidder_id="0", max_alloc=None):
        """Lower envelope of (allocation, price-per-unit) pairs.

        tau(z) is the cheapest price among pairs whose allocation is at
        least z. Pairs with zero allocation are ignored.
        """
        x = np.asarray(allocs, dtype=float)
        p = np.asarray(ppcs, dtype=float)
        keep = x > 0
        x, p = x[keep], p[keep]
        if not len(x):
            raise NeverAllocated(bidder_id)
        levels, inv = np.unique(x, return_inverse=True)
        cheapest = np.full(len(levels), np.inf)
        np.minimum.at(cheapest, inv, p)
        # Suffix minimum: any level at least z is admissible for z.
        heights = np.minimum.accumulate(cheapest[::-1])[::-1]
        # Merge runs of equal heights.
        keep = np.concatenate([heights[1:] != heights[:-1], [True]])
        z = np.concatenate([[0.0], levels[keep]])
        heights = heights[keep]
        if max_alloc is None:
            max_alloc = float(levels[-1])
        return cls(bidder_id, z, heights, max_alloc)

    def tau(self, z):
        z = np.asarray(z, dtype=float)
        k = np.clip(np.searchsorted(self.z, z, side="left") - 1, 0, len(self.heights) - 1)
        return self.heights[k]

    def __call__(self, x):
        return threshold_integral(self, x)

    @property
    def total(self):
        """T at the maximum marginal allocation."""
        return float(threshold_integral(self, self.max_alloc))


def tau(curves: InterimCurves, bidder, max_alloc=None) -> ThresholdCurve:
    i = curves.index(bidder)
    return ThresholdCurve.from_levels(curves.alloc[i], ppc_curve(curves, i),
                                      curves.bidder_ids[i], max_alloc)


def threshold_integral(tc: ThresholdCurve, x):
    """Exact integral of tau from 0 to x; x may be a scalar or an array."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -RANGE_TOL) or np.any(xa > tc.max_alloc + RANGE_TOL):
        raise OutOfRange(f"allocation outside [0, {tc.max_alloc}] for bidder {tc.bidder_id!r}")
    xa = np.clip(xa, 0.0, tc.z[-1])
    k = np.clip(np.searchsorted(tc.z, xa, side="right") - 1, 0, len(tc.heights) - 1)
    out = tc.cumulative[k] + tc.heights[k] * (xa - tc.z[k])
    return float(out) if out.ndim == 0 else out


def max_allocation(ds: AuctionDataset, bidder) -> float:
    i = ds.bidder_ids.index(bidder) if isinstance(bidder, str) else int(bidder)
    return float(max_allocations(ds)[i])


def build_thresholds(curves: InterimCurves, ds: AuctionDataset):
    """Threshold curve per bidder; None for bidders never allocated."""
    xbar = max_allocations(ds)
    out = []
    for i in range(len(curves.bidder_ids)):
        if xbar[i] <= 0 or not (curves.alloc[i] > 0).any():
            out.append(None)
            continue
        out.append(tau(curves, i, max_alloc=xbar[i]))
    return out


def slot_markers(ds: AuctionDataset, bidder):
    """Expected allocation of `bidder` when always placed in slot j, per slot."""
    i = ds.bidder_ids.index(bidder) if isinstance(bidder, str) else int(bidder)
    return np.array([(ds.alphas[:, j:j + 1] * ds.qualities).mean(axis=0)[i]
                     for j in range(ds.alphas.shape[1])])


def thresholds_to_csv(thresholds, ds: AuctionDataset):
    rows = ["bidder_id,alloc,T,kind"]
    for i, tc in enumerate(thresholds):
        if tc is None:
            continue
        for z, c in zip(tc.z, tc.cumulative):
            if z <= tc.max_alloc + RANGE_TOL:
                rows.append(f"{tc.bidder_id},{z!r},{c!r},curve")
        rows.append(f"{tc.bidder_id},{tc.max_alloc!r},{tc.total!r},max")
        for j, x in enumerate(slot_markers(ds, i)):
            if x > 0:
                rows.append(f"{tc.bidder_id},{float(x)!r},{threshold_integral(tc, x)!r},slot{j + 1}")
    return "\n".join(rows) + "\n"
