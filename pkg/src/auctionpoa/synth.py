"""Synthetic auction logs with known values, for validating welfare bounds."""
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .auction import position_outcomes
from .dataset import AuctionDataset, dump_jsonl
from .exceptions import SpecError
from .interim import BidGrid

KINDS = ("fpa", "gsp_learning", "correlated")
DEFAULT_ALPHAS = (1.0, 0.6, 0.3)
DEFAULT_LEARNER_GRID = 41


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    n: int
    T: int
    seed: int
    values: dict = field(default_factory=lambda: {"uniform": 1.0})
    qualities: dict = field(default_factory=lambda: {"fixed": 1.0})
    alphas: tuple = DEFAULT_ALPHAS
    reserve: float = 0.0
    omega: float = 0.0
    bid_max: float = 1.0
    learner: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        for name in ("n", "T", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise SpecError(f"{name} must be an integer, got {v!r}")
        if self.n < 1 or self.T < 1 or self.seed < 0:
            raise SpecError("need n >= 1, T >= 1 and a non-negative seed")
        a = tuple(float(x) for x in self.alphas)
        if not a or any(x < 0 for x in a) or any(x < y for x, y in zip(a, a[1:])):
            raise SpecError("alphas must be a non-empty non-increasing list of non-negative numbers")
        object.__setattr__(self, "alphas", a)
        if not 0.0 <= self.omega <= 1.0:
            raise SpecError(f"omega must lie in [0, 1], got {self.omega}")
        if not self.reserve >= 0 or not self.bid_max > 0:
            raise SpecError("reserve must be >= 0 and bid_max > 0")
        _check_dist(self.values, "values", self.n)
        _check_dist(self.qualities, "qualities", self.n, upper=1.0)
        if self.kind == "fpa" and len(a) != 1:
            raise SpecError("the first-price generator supports a single slot only")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SpecError("spec must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec fields: {sorted(extra)}")
        missing = {"kind", "n", "T", "seed"} - set(d)
        if missing:
            raise SpecError(f"missing spec fields: {sorted(missing)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise SpecError(str(e)) from None

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SpecError(f"spec is not valid JSON: {e}") from None
        return cls.from_dict(d)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.__dict__.items()}


def _check_dist(d, name, n, upper=None):
    if not isinstance(d, dict) or len(d) != 1:
        raise SpecError(f"{name} must be {{'uniform': ...}} or {{'fixed': ...}}")
    (kind, arg), = d.items()
    if kind == "uniform":
        lo, hi = (0.0, arg) if np.isscalar(arg) else arg
        if not 0 <= lo <= hi or (upper is not None and hi > upper):
            raise SpecError(f"bad uniform range for {name}: {arg!r}")
    elif kind == "fixed":
        vals = np.atleast_1d(np.asarray(arg, dtype=float))
        if len(vals) not in (1, n) or np.any(vals < 0) or (upper is not None and np.any(vals > upper)):
            raise SpecError(f"fixed {name} must be one number or one per bidder in range")
    else:
        raise SpecError(f"unknown distribution {kind!r} for {name}")


def _draw(d, rng, shape):
    (kind, arg), = d.items()
    if kind == "fixed":
        return np.broadcast_to(np.asarray(arg, dtype=float), shape).copy()
    lo, hi = (0.0, arg) if np.isscalar(arg) else arg
    return rng.uniform(lo, hi, size=shape)


def _upper(d):
    (kind, arg), = d.items()
    if kind == "fixed":
        return float(np.max(arg))
    return float(arg if np.isscalar(arg) else arg[1])


@dataclass(frozen=True)
class GroundTruth:
    values: np.ndarray             # (T, n)
    opt_welfare: np.ndarray        # (T,)
    realized_welfare: np.ndarray   # (T,)
    regret: Optional[np.ndarray] = None   # (n,) total over rounds
    diagnostics: dict = field(default_factory=dict)

    @property
    def ratio(self):
        opt = math.fsum(self.opt_welfare)
        return math.fsum(self.realized_welfare) / opt if opt > 0 else 1.0

    @property
    def eps_regret(self):
        if self.regret is None:
            return 0.0
        opt = math.fsum(self.opt_welfare)
        return max(0.0, float(np.sum(self.regret))) / opt if opt > 0 else 0.0

    def to_dict(self):
        return {
            "values": self.values.tolist(),
            "opt_welfare": self.opt_welfare.tolist(),
            "realized_welfare": self.realized_welfare.tolist(),
            "ratio": self.ratio,
            "regret": None if self.regret is None else self.regret.tolist(),
            "eps_regret": self.eps_regret,
            "diagnostics": self.diagnostics,
        }


def opt_welfare(values, qualities, alphas):
    """Per-record welfare of the best assignment (reserves ignored)."""
    w = -np.sort(-(np.asarray(values) * qualities), axis=1)
    m = min(w.shape[1], alphas.shape[1])
    return (alphas[:, :m] * w[:, :m]).sum(axis=1)


def _truth(ds, values, regret=None, diagnostics=None):
    realized = (values * ds.realized_allocations).sum(axis=1)
    opt = opt_welfare(values, ds.qualities, ds.alphas)
    return GroundTruth(values, opt, realized, regret, diagnostics or {})


def _dataset(spec, bids, scores, qualities, pricing="gsp", grid=None, value_cap=None, bid_cap=None):
    T, n = bids.shape
    m = len(spec.alphas)
    return AuctionDataset(
        [str(t) for t in range(T)], [f"b{i}" for i in range(n)], bids, scores, qualities,
        np.tile(spec.alphas, (T, 1)), np.full(T, m), np.full(T, spec.reserve),
        np.full(T, spec.reserve), np.zeros(T, dtype=int), np.full(T, m),
        bid_cap=bid_cap, grid_spec=grid, value_cap=value_cap, pricing=pricing,
    )


def gen_fpa_bne(spec: SynthSpec):
    """Single-slot first-price auction at the symmetric equilibrium b = v (n-1)/n."""
    if spec.kind != "fpa" or len(spec.alphas) != 1:
        raise SpecError("gen_fpa_bne needs an fpa spec with one slot")
    rng = np.random.default_rng(spec.seed)
    values = _draw(spec.values, rng, (spec.T, spec.n))
    bids = values * (spec.n - 1) / spec.n
    ones = np.ones_like(bids)
    ds = _dataset(spec, bids, ones, ones, pricing="first", value_cap=_upper(spec.values))
    return ds, _truth(ds, values)


def _learner_grid(spec, vmax):
    g = int(spec.learner.get("grid_points", DEFAULT_LEARNER_GRID))
    if g < 2:
        raise SpecError("learner grid needs at least two points")
    return np.linspace(0.0, vmax, g)


def gen_gsp_learning(spec: SynthSpec):
    """GSP with fixed values; every bidder runs full-information Hedge over a bid grid."""
    if spec.kind != "gsp_learning":
        raise SpecError("gen_gsp_learning needs a gsp_learning spec")
    rng = np.random.default_rng(spec.seed)
    v = _draw(spec.values, rng, (spec.n,))
    vmax = float(v.max()) if v.max() > 0 else 1.0
    qual = _draw(spec.qualities, rng, (spec.T, spec.n))
    scores = np.ones((spec.T, spec.n))
    grid = _learner_grid(spec, vmax)
    G = len(grid)
    eta = float(spec.learner.get("eta", math.sqrt(8 * math.log(G) / spec.T)))
    alphas = np.array([spec.alphas])
    m = len(spec.alphas)
    ctx = dict(scores=scores[:1], alphas=alphas, reserve=np.array([spec.reserve]),
               mainline_reserve=np.array([spec.reserve]), mainline_len=np.zeros(1, dtype=int),
               mainline_cap=np.array([m]))

    logw = np.zeros((spec.n, G))
    bids = np.zeros((spec.T, spec.n))
    for t in range(spec.T):
        for i in range(spec.n):
            p = np.exp(logw[i] - logw[i].max())
            bids[t, i] = grid[rng.choice(G, p=p / p.sum())]
        row = bids[t:t + 1]
        for i in range(spec.n):
            x, pay = position_outcomes(i, grid, bids=row, qualities=qual[t:t + 1], **ctx)
            logw[i] += eta * (v[i] * x[0] - pay[0]) / vmax

    pts = [float(b) for b in grid]
    ds = _dataset(spec, bids, scores, qual, grid=pts, value_cap=vmax)
    if ds.bid_cap < grid[-1]:
        # the cap must cover the whole learner grid
        ds = _dataset(spec, bids, scores, qual, grid=pts, value_cap=vmax, bid_cap=float(grid[-1]))
    values = np.tile(v, (spec.T, 1))
    regret = hindsight_regret(ds, v)
    diag = {"eta": eta, "learner_grid_points": G, "avg_regret": (regret / spec.T).tolist()}
    return ds, _truth(ds, values, regret, diag)


def hindsight_regret(ds: AuctionDataset, v, grid=None):
    """Total regret per bidder against the best fixed bid on the analysis grid.

    The analysis grid is the dataset grid spec joined with 0 and the bid cap,
    the same set the interim curves are evaluated on.
    """
    g = BidGrid.for_dataset(ds).points if grid is None else np.asarray(grid, dtype=float)
    arrs = ds.arrays()
    pay_real, alloc_real = ds.realized_payments, ds.realized_allocations
    out = np.zeros(ds.n)
    for i in range(ds.n):
        x, p = position_outcomes(i, g, **arrs)
        best = (v[i] * x - p).sum(axis=0).max()
        got = math.fsum(v[i] * alloc_real[:, i] - pay_real[:, i])
        out[i] = best - got
    return out


def gen_correlated(spec: SynthSpec):
    """bid = omega * common shock + (1 - omega) * idiosyncratic noise, both uniform[0, bid_max]."""
    if spec.kind != "correlated":
        raise SpecError("gen_correlated needs a correlated spec")
    rng = np.random.default_rng(spec.seed)
    z = rng.uniform(0, spec.bid_max, size=(spec.T, 1))
    e = rng.uniform(0, spec.bid_max, size=(spec.T, spec.n))
    bids = spec.omega * z + (1 - spec.omega) * e
    qual = _draw(spec.qualities, rng, (spec.T, spec.n))
    return _dataset(spec, bids, np.ones_like(bids), qual)


def generate(spec: SynthSpec):
    """(dataset, ground truth or None) for any generator kind."""
    if spec.kind == "fpa":
        return gen_fpa_bne(spec)
    if spec.kind == "gsp_learning":
        return gen_gsp_learning(spec)
    return gen_correlated(spec), None


def write_synth(out_dir, ds: AuctionDataset, truth: Optional[GroundTruth], spec: SynthSpec = None):
    """Write dataset.jsonl, dataset.config.json and (if known) ground_truth.json."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {"dataset": os.path.join(out_dir, "dataset.jsonl"),
             "config": os.path.join(out_dir, "dataset.config.json")}
    with open(paths["dataset"], "w") as fh:
        fh.write(dump_jsonl(ds))
    with open(paths["config"], "w") as fh:
        json.dump(ds.config(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if truth is not None:
        paths["ground_truth"] = os.path.join(out_dir, "ground_truth.json")
        d = truth.to_dict()
        if spec is not None:
            d["spec"] = spec.to_dict()
        with open(paths["ground_truth"], "w") as fh:
            json.dump(d, fh, sort_keys=True)
            fh.write("\n")
    return paths
