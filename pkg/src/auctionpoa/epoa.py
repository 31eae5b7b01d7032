"""Empirical price of anarchy reports, bootstrap intervals and mode comparison."""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .covering import compute_covering
from .dataset import AuctionDataset
from .exceptions import ZeroRevenue
from .interim import DEFAULT_MC_PROFILES, DEFAULT_MIN_RATIO, BidGrid, estimate_curves
from .thresholds import build_thresholds
from .validation import check_dataset, check_mode, check_scalar
from .valuecover import DEFAULT_VALUE_POINTS, lambda_mu1, rho, value_cover, value_grid

SCHEMA_VERSION = 1
DEFAULT_STATISTICS = ("revenue", "tbar1", "tavg", "lb_t", "mu1", "lambda1",
                      "epoa_bound", "inv_epoa1", "inv_lb_epoa", "inv_fa_epoa")


@dataclass(frozen=True)
class BootstrapCI:
    statistic: str
    point: float
    lower: float
    upper: float
    se: float
    replicates: int
    level: float
    seed: int


@dataclass(frozen=True)
class EpoaReport:
    mode: str
    n_auctions: int
    n_bidders: int
    revenue: float
    tbar1: float
    tavg: float
    lb_t: float
    mu1: float
    mu_lb: float
    mu_avg: float
    rho1: float
    lambda1: float
    epoa1: float
    epoa_bound: float
    inv_epoa1: float
    lambda_lb: Optional[float]
    lb_epoa: float
    inv_lb_epoa: float
    fa_epoa: float
    inv_fa_epoa: float
    lambda_conc: Optional[float]
    concentration_k: Optional[float]
    value_cap: float
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    bootstrap: dict = field(default_factory=dict)

    def statistic(self, name):
        return float(getattr(self, name))

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return _jsonable(d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def with_bootstrap(self, cis):
        d = {f.name: getattr(self, f.name) for f in self.__dataclass_fields__.values()}
        d["bootstrap"] = {k: asdict(v) for k, v in cis.items()}
        return EpoaReport(**d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _bound(mu, lam):
    if mu <= 0:
        return 1.0
    return max(1.0, min(rho(mu), mu / lam))


def _half_grid(grid: BidGrid, grid_points, min_ratio, ds):
    if grid_points is None and isinstance(ds.grid_spec, (list, tuple)):
        pts = grid.points[::2]
        return BidGrid.from_points(pts, ds.bid_cap)
    n_pos = len(grid) - 1
    return BidGrid.geometric(ds.bid_cap, max(1, (n_pos + 1) // 2), min_ratio)


class EmpiricalPoA(BaseEstimator):
    """Data-driven welfare guarantee for a position auction log.

    Fitting estimates interim curves, threshold functions, the revenue
    covering parameter against the linearized bound, and the value covering
    refinement, then assembles an `EpoaReport` in ``report_``.

    Parameters
    ----------
    grid_points : int or None
        Positive grid bids; None uses the dataset grid spec or 201.
    grid_min_ratio : float
        Lowest positive grid bid as a fraction of the bid cap.
    mode : {"joint", "independent"}
        Keep opponent bids paired with their contexts, or resample them
        independently.
    mc_profiles : int
        Minimum simulated profiles per grid bid in independent mode.
    value_cap : float or None
        Upper bound on values; None uses the dataset's, else ten times the
        largest observed price per unit.
    value_points : int
        Geometric value grid size (envelope switch prices are always added).
    random_state : int
    n_jobs : int
    diagnostics : bool
        Also recompute at half grid resolution and report the change in mu1.
    """

    def __init__(self, grid_points=None, grid_min_ratio=DEFAULT_MIN_RATIO, mode="joint",
                 mc_profiles=DEFAULT_MC_PROFILES, value_cap=None, value_points=DEFAULT_VALUE_POINTS,
                 random_state=0, n_jobs=1, diagnostics=True):
        self.grid_points = grid_points
        self.grid_min_ratio = grid_min_ratio
        self.mode = mode
        self.mc_profiles = mc_profiles
        self.value_cap = value_cap
        self.value_points = value_points
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.diagnostics = diagnostics

    def _check_params(self):
        check_mode(self.mode)
        check_scalar(self.value_points, "value_points", min_val=1, integer=True)
        check_scalar(self.n_jobs, "n_jobs", min_val=1, integer=True)
        if self.value_cap is not None:
            check_scalar(self.value_cap, "value_cap", min_val=0, include_min=False)

    def _curves(self, ds, grid):
        return estimate_curves(ds, grid, self.mode, self.mc_profiles, self.random_state,
                               n_jobs=self.n_jobs)

    def fit(self, X, y=None):
        ds = check_dataset(X)
        self._check_params()
        self.grid_ = BidGrid.for_dataset(ds, self.grid_points, self.grid_min_ratio)
        self.curves_ = self._curves(ds, self.grid_)
        self.thresholds_ = build_thresholds(self.curves_, ds)
        self.covering_ = compute_covering(ds, self.thresholds_)
        cov = self.covering_

        cap = self.value_cap if self.value_cap is not None else ds.value_cap
        self.value_cover_ = value_cover(self.curves_, self.thresholds_, cov.mu1, cap,
                                        self.value_points)
        vc = self.value_cover_
        lambda_lb = None
        if cov.mu_lb > 0:
            grids, _ = value_grid(self.curves_, vc.value_cap, self.value_points)
            lambda_lb = lambda_mu1(self.curves_, self.thresholds_, cov.mu_lb, grids)
        lb_epoa = _bound(cov.mu_lb, lambda_lb)
        fa_epoa = rho(cov.mu_avg) if cov.mu_avg > 0 else 1.0

        diag = dict(self.curves_.diagnostics)
        excluded = [b for b, tc in zip(ds.bidder_ids, self.thresholds_) if tc is None]
        diag["excluded_bidders"] = excluded
        diag["bid_cap"] = ds.bid_cap
        diag["grid_size"] = len(self.grid_)
        diag["padded_cells"] = int(ds.padded.sum())
        if self.mode == "independent":
            diag["independent_mode_note"] = (
                "opponent bids resampled from per-bidder marginals; contexts swept in log order")
        if self.diagnostics:
            half = _half_grid(self.grid_, self.grid_points, self.grid_min_ratio, ds)
            hc = self._curves(ds, half)
            hcov = compute_covering(ds, build_thresholds(hc, ds))
            diag["half_grid_mu1"] = hcov.mu1
            diag["half_grid_rel_change"] = abs(hcov.mu1 - cov.mu1) / cov.mu1 if cov.mu1 else 0.0

        bound = vc.bound
        self.report_ = EpoaReport(
            mode=self.mode, n_auctions=ds.T, n_bidders=ds.n,
            revenue=cov.revenue, tbar1=cov.tbar1, tavg=cov.tavg, lb_t=cov.lb_t,
            mu1=cov.mu1, mu_lb=cov.mu_lb, mu_avg=cov.mu_avg,
            rho1=vc.rho, lambda1=vc.lambda1, epoa1=vc.epoa1,
            epoa_bound=bound, inv_epoa1=1.0 / bound,
            lambda_lb=lambda_lb, lb_epoa=lb_epoa, inv_lb_epoa=1.0 / lb_epoa,
            fa_epoa=fa_epoa, inv_fa_epoa=1.0 / fa_epoa,
            lambda_conc=vc.lambda_conc, concentration_k=vc.k, value_cap=vc.value_cap,
            config={k: v for k, v in self.get_params().items() if k != "n_jobs"},
            diagnostics=diag,
        )
        return self

    def score(self, X=None, y=None):
        """Lower bound on welfare efficiency (1 / EPoA) of the fitted log."""
        check_is_fitted(self, "report_")
        return self.report_.inv_epoa1


def analyze(ds: AuctionDataset, **params) -> EpoaReport:
    return EmpiricalPoA(**params).fit(ds).report_


def _replicate_seed(seed, r):
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


def _bootstrap_values(estimator, ds, replicates, seed, statistics, n_jobs):
    base_seed = estimator.random_state if estimator.random_state is not None else 0

    def one(r):
        rng = np.random.default_rng([seed, r])
        idx = rng.integers(0, ds.T, size=ds.T)
        est = clone(estimator).set_params(diagnostics=False, n_jobs=1,
                                          random_state=_replicate_seed(base_seed, r))
        try:
            rep = est.fit(ds.take(idx)).report_
        except ZeroRevenue:
            return None
        return [rep.statistic(s) for s in statistics]

    if n_jobs == 1:
        out = [one(r) for r in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(one, range(replicates)))
    return out


def bootstrap_ci(estimator, ds: AuctionDataset, replicates=200, level=0.9, seed=0, n_jobs=1,
                 statistics=DEFAULT_STATISTICS, point_report=None):
    """Percentile bootstrap over auctions (resampled with replacement).

    Returns ``(cis, diagnostics)`` where `cis` maps statistic name to
    `BootstrapCI`. Replicates with zero revenue are dropped and counted.
    """
    check_scalar(replicates, "replicates", min_val=10, integer=True)
    check_scalar(level, "level", min_val=0, max_val=1, include_min=False)
    if point_report is None:
        point_report = clone(estimator).set_params(diagnostics=False).fit(ds).report_
    rows = _bootstrap_values(estimator, ds, replicates, seed, statistics, n_jobs)
    kept = np.array([r for r in rows if r is not None], dtype=float).reshape(-1, len(statistics))
    dropped = replicates - len(kept)
    q = [100 * (1 - level) / 2, 100 * (1 + level) / 2]
    cis = {}
    for j, name in enumerate(statistics):
        col = kept[:, j]
        if len(col):
            lo, hi = np.percentile(col, q)
            se = float(col.std(ddof=1)) if len(col) > 1 else 0.0
        else:
            lo = hi = se = math.nan
        cis[name] = BootstrapCI(name, point_report.statistic(name), float(lo), float(hi), se,
                                len(col), level, seed)
    return cis, {"replicates_requested": replicates, "replicates_dropped_zero_revenue": dropped}


def compare_correlation_modes(estimator, ds: AuctionDataset, replicates=50, level=0.9, seed=0,
                              n_jobs=1, statistic="epoa_bound"):
    """Fit in joint and independent mode; check that ignoring correlation
    does not lower the bound by more than twice the combined bootstrap SE."""
    reports, ses = {}, {}
    for mode in ("joint", "independent"):
        est = clone(estimator).set_params(mode=mode)
        rep = est.fit(ds).report_
        cis, diag = bootstrap_ci(est, ds, replicates, level, seed, n_jobs, (statistic,), rep)
        reports[mode] = rep.with_bootstrap(cis)
        ses[mode] = cis[statistic].se
    tol = 2.0 * math.sqrt(ses["joint"] ** 2 + ses["independent"] ** 2)
    joint = reports["joint"].statistic(statistic)
    gap = reports["independent"].statistic(statistic) - joint
    # rounding slack so that identical estimates never count as a violation
    tol += 1e-12 * max(1.0, abs(joint))
    return {
        "report_joint": reports["joint"],
        "report_independent": reports["independent"],
        "statistic": statistic,
        "difference": gap,
        "tolerance": tol,
        "ordering_holds": bool(gap >= -tol),
    }


# ---------------------------------------------------------------- tables

TABLE_COLUMNS = (
    ("1/EPoA1", "inv_epoa1"),
    ("Tbar1/Rev", "mu1"),
    ("lambda1", "lambda1"),
    ("LB-T/Rev", "mu_lb"),
    ("1/LB-EPoA", "inv_lb_epoa"),
    ("Tavg/Rev", "mu_avg"),
    ("1/FA-EPoA", "inv_fa_epoa"),
)


def _table_rows(named_reports):
    ci_names = sorted({k for _, r in named_reports for k in r.bootstrap})
    header = ["name"] + [c for c, _ in TABLE_COLUMNS]
    for k in ci_names:
        header += [f"{k}_lo", f"{k}_hi"]
    rows = []
    for name, r in named_reports:
        row = [name] + [f"{getattr(r, a):.4f}" for _, a in TABLE_COLUMNS]
        for k in ci_names:
            ci = r.bootstrap.get(k)
            row += ["" if ci is None else f"{ci['lower']:.4f}", "" if ci is None else f"{ci['upper']:.4f}"]
        rows.append(row)
    return header, rows


def reports_to_markdown(named_reports):
    header, rows = _table_rows(named_reports)
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def reports_to_csv(named_reports):
    header, rows = _table_rows(named_reports)
    return "\n".join(",".join(r) for r in [header] + rows) + "\n"


def report_from_dict(d) -> EpoaReport:
    d = dict(d)
    d.pop("schema_version", None)
    return EpoaReport(**d)
