"""Interim allocation and payment curves by counterfactual simulation.

For bidder i and grid bid b the joint estimator replays every logged auction
with i's bid replaced by b, keeping each opponent profile paired with its own
context. The independent estimator breaks that pairing: each opponent's bid
is drawn from its own empirical marginal, independently of other opponents
and of the context.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .auction import position_outcomes
from .dataset import AuctionDataset
from .exceptions import BidCapTooLow
from .validation import check_dataset, check_mode, check_scalar, check_seed

CAP_TOL = 1e-9
DEFAULT_GRID_POINTS = 201
DEFAULT_MIN_RATIO = 1e-3
DEFAULT_MC_PROFILES = 200


@dataclass(frozen=True)
class BidGrid:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("bid grid needs at least two points")
        if p[0] != 0.0:
            raise ValueError("bid grid must start at 0")
        if not np.all(np.diff(p) > 0):
            raise ValueError("bid grid must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def cap(self):
        return float(self.points[-1])

    def __len__(self):
        return len(self.points)

    @classmethod
    def geometric(cls, bid_cap, points=DEFAULT_GRID_POINTS, min_ratio=DEFAULT_MIN_RATIO):
        """`points` geometric points on [cap*min_ratio, cap], plus 0."""
        check_scalar(points, "grid_points", min_val=1, integer=True)
        check_scalar(min_ratio, "grid_min_ratio", min_val=0, max_val=1, include_min=False)
        if points == 1:
            pos = np.array([bid_cap], dtype=float)
        else:
            pos = np.geomspace(bid_cap * min_ratio, bid_cap, points)
            pos[-1] = bid_cap
        return cls(np.concatenate([[0.0], pos]))

    @classmethod
    def from_points(cls, points, bid_cap):
        p = np.unique(np.asarray(points, dtype=float))
        if len(p) and (p[0] < 0 or p[-1] > bid_cap):
            raise ValueError("grid points must lie in [0, bid_cap]")
        return cls(np.unique(np.concatenate([[0.0], p, [bid_cap]])))

    @classmethod
    def for_dataset(cls, ds: AuctionDataset, points=None, min_ratio=DEFAULT_MIN_RATIO):
        """Grid from an explicit point count, else the dataset's grid spec, else the default."""
        spec = points if points is not None else ds.grid_spec
        if spec is None:
            spec = DEFAULT_GRID_POINTS
        if isinstance(spec, (list, tuple, np.ndarray)):
            return cls.from_points(spec, ds.bid_cap)
        return cls.geometric(ds.bid_cap, int(spec), min_ratio)


@dataclass(frozen=True)
class InterimCurves:
    bidder_ids: tuple
    grid: BidGrid
    alloc: np.ndarray      # (n, G)
    pay: np.ndarray        # (n, G)
    mode: str = "joint"
    mc_profiles: int = 0
    seed: int = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def index(self, bidder):
        if isinstance(bidder, str):
            return self.bidder_ids.index(bidder)
        return int(bidder)

    def to_csv(self):
        rows = ["bidder_id,bid,alloc,pay"]
        for i, b in enumerate(self.bidder_ids):
            for g, bid in enumerate(self.grid.points):
                rows.append(f"{b},{bid!r},{self.alloc[i, g]!r},{self.pay[i, g]!r}")
        return "\n".join(rows) + "\n"


def top_slot_ctrs(ds: AuctionDataset):
    """Per-record CTR of the slot a top-ranked bidder receives.

    That is the first slot unless the mainline is closed (capacity 0), in
    which case it is the first slot after the mainline block.
    """
    closed = (ds.mainline_len > 0) & (ds.mainline_cap == 0)
    top = np.where(closed, ds.mainline_len, 0)
    M = ds.alphas.shape[1]
    a = ds.alphas[np.arange(ds.T), np.minimum(top, M - 1)]
    return np.where(top < M, a, 0.0)


def max_allocations(ds: AuctionDataset):
    """Per-bidder top-rank allocation averaged over the logged contexts."""
    return (top_slot_ctrs(ds)[:, None] * ds.qualities).mean(axis=0)


def _independent_rows(ds: AuctionDataset, bidder, mc_profiles, seed):
    # Contexts are swept exhaustively (repeated as needed to reach R profiles);
    # each opponent's bid is an independent draw from its own marginal.
    rng = np.random.default_rng([seed, bidder])
    reps = max(1, math.ceil(mc_profiles / ds.T))
    ctx = np.tile(np.arange(ds.T), reps)
    bids = ds.bids[ctx].copy()
    for j in range(ds.n):
        if j != bidder:
            bids[:, j] = ds.bids[rng.integers(0, ds.T, size=len(ctx)), j]
    arrs = ds.arrays()
    for key in ("scores", "qualities", "alphas", "reserve", "mainline_reserve",
                "mainline_len", "mainline_cap"):
        arrs[key] = arrs[key][ctx]
    arrs["bids"] = bids
    return arrs


def _estimate_one(ds, bidder, points, mode, mc_profiles, seed):
    arrs = ds.arrays() if mode == "joint" else _independent_rows(ds, bidder, mc_profiles, seed)
    alloc, pay = position_outcomes(bidder, points, **arrs)
    return alloc.mean(axis=0), pay.mean(axis=0)


def estimate_curves(ds: AuctionDataset, grid: BidGrid = None, mode="joint",
                    mc_profiles=DEFAULT_MC_PROFILES, seed=None, check_cap=True, n_jobs=1):
    check_dataset(ds)
    check_mode(mode)
    if grid is None:
        grid = BidGrid.for_dataset(ds)
    if grid.cap > ds.bid_cap * (1 + 1e-12):
        raise ValueError("grid extends beyond the dataset bid cap")
    if mode == "independent":
        check_scalar(mc_profiles, "mc_profiles", min_val=1, integer=True)
        check_seed(seed, "seed")

    def work(i):
        return _estimate_one(ds, i, grid.points, mode, mc_profiles, seed)

    if n_jobs == 1 or ds.n == 1:
        results = [work(i) for i in range(ds.n)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(ds.n)))
    alloc = np.vstack([r[0] for r in results])
    pay = np.vstack([r[1] for r in results])

    diagnostics = {}
    if mode == "joint":
        if (np.diff(alloc, axis=1) < 0).any() or (np.diff(pay, axis=1) < 0).any():
            raise AssertionError("joint-mode interim curves are not monotone in the bid")
    else:
        repaired = np.maximum.accumulate(alloc, axis=1), np.maximum.accumulate(pay, axis=1)
        diagnostics["monotone_repairs"] = int((repaired[0] != alloc).sum() + (repaired[1] != pay).sum())
        alloc, pay = repaired

    if check_cap:
        need = max_allocations(ds)
        for i in range(ds.n):
            if alloc[i, -1] < need[i] - CAP_TOL:
                raise BidCapTooLow(ds.bidder_ids[i], float(alloc[i, -1]), float(need[i]))

    p_min = float((ds.reserve[:, None] / ds.scores).min())
    with np.errstate(divide="ignore", invalid="ignore"):
        ppc = np.where(alloc > 0, pay / alloc, np.inf)
    diagnostics["ppc_floor"] = p_min
    diagnostics["ppc_floor_violations"] = int((ppc < p_min * (1 - 1e-12)).sum())

    alloc.setflags(write=False)
    pay.setflags(write=False)
    return InterimCurves(ds.bidder_ids, grid, alloc, pay, mode,
                         mc_profiles if mode == "independent" else 0, seed, diagnostics)


def ppc_curve(curves: InterimCurves, bidder):
    """Price per unit at each grid bid; NaN where the allocation is zero."""
    i = curves.index(bidder)
    x, p = curves.alloc[i], curves.pay[i]
    out = np.full(len(x), np.nan)
    pos = x > 0
    out[pos] = p[pos] / x[pos]
    return out


class InterimCurveEstimator(BaseEstimator):
    """Estimate interim allocation and payment curves from an auction log.

    Parameters
    ----------
    grid_points : int or None
        Number of positive grid bids. None defers to the dataset's grid spec.
    grid_min_ratio : float
        Lowest positive grid bid as a fraction of the bid cap.
    mode : {"joint", "independent"}
    mc_profiles : int
        Minimum simulated opponent profiles per grid bid (independent mode).
    random_state : int or None
    n_jobs : int

    Attributes
    ----------
    grid_ : BidGrid
    curves_ : InterimCurves
    """

    def __init__(self, grid_points=None, grid_min_ratio=DEFAULT_MIN_RATIO, mode="joint",
                 mc_profiles=DEFAULT_MC_PROFILES, random_state=None, n_jobs=1):
        self.grid_points = grid_points
        self.grid_min_ratio = grid_min_ratio
        self.mode = mode
        self.mc_profiles = mc_profiles
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        ds = check_dataset(X)
        self.grid_ = BidGrid.for_dataset(ds, self.grid_points, self.grid_min_ratio)
        self.curves_ = estimate_curves(ds, self.grid_, self.mode, self.mc_profiles,
                                       self.random_state, n_jobs=self.n_jobs)
        return self

    def transform(self, X=None):
        """Stacked ``(n_bidders, n_grid, 2)`` array of (allocation, payment)."""
        check_is_fitted(self, "curves_")
        return np.stack([self.curves_.alloc, self.curves_.pay], axis=-1)
