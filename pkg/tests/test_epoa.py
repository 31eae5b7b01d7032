import json

import numpy as np
import pytest
from sklearn.base import clone

from auctionpoa import (EmpiricalPoA, SynthSpec, ZeroRevenue, analyze, bootstrap_ci,
                        compare_correlation_modes, gen_fpa_bne, rho)
from auctionpoa.epoa import TABLE_COLUMNS, report_from_dict, reports_to_csv, reports_to_markdown

from conftest import make_dataset, random_dataset


@pytest.fixture(scope="module")
def market():
    rng = np.random.default_rng(7)
    return make_dataset(rng.uniform(0, 1, (300, 4)), alphas=(1.0, 0.6, 0.3),
                        qualities=rng.uniform(0.3, 1, (300, 4)), reserve=0.05)


def test_uncontested_single_bidder_has_no_revenue():
    with pytest.raises(ZeroRevenue):
        analyze(make_dataset([[1.0], [2.0]]))


def test_column_identities(market):
    r = analyze(market)
    assert r.mu1 == r.tbar1 / r.revenue
    assert r.mu_lb == r.lb_t / r.revenue
    assert r.mu_avg == r.tavg / r.revenue
    assert r.rho1 == rho(r.mu1)
    assert r.epoa1 == r.mu1 / r.lambda1
    assert r.epoa_bound == max(1.0, min(r.rho1, r.epoa1))
    assert r.inv_epoa1 == 1.0 / r.epoa_bound
    assert 0 < r.inv_epoa1 <= 1
    assert r.fa_epoa == rho(r.mu_avg)
    assert 0 < r.inv_lb_epoa <= 1 and r.inv_epoa1 <= r.inv_lb_epoa + 1e-12


def test_fpa_bound_validity():
    ds, truth = gen_fpa_bne(SynthSpec(kind="fpa", n=3, T=500, seed=2, alphas=(1.0,)))
    r = analyze(ds)
    assert r.inv_epoa1 <= truth.ratio + 1e-9


def test_scale_invariance(market):
    c = 3.0
    scaled = make_dataset(market.bids * c, market.alphas[0], market.qualities, reserve=0.05 * c,
                          bid_cap=market.bid_cap * c)
    a, b = analyze(market), analyze(scaled)
    for name in ("mu1", "lambda1", "inv_epoa1", "mu_lb", "mu_avg"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-9)
    for name in ("revenue", "tbar1", "tavg", "lb_t"):
        assert getattr(b, name) == pytest.approx(c * getattr(a, name), rel=1e-9)


def test_report_is_pure_and_thread_independent(market):
    a = EmpiricalPoA(n_jobs=1).fit(market).report_.to_json()
    b = EmpiricalPoA(n_jobs=3).fit(market).report_.to_json()
    assert a == b


def test_json_round_trip(market):
    r = analyze(market)
    d = json.loads(r.to_json())
    assert d["schema_version"] == 1
    back = report_from_dict(d)
    assert back.to_json() == r.to_json()


def test_diagnostics(market):
    r = analyze(market)
    assert r.diagnostics["excluded_bidders"] == []
    assert r.diagnostics["half_grid_rel_change"] < 0.1
    assert r.value_cap > 0


def test_tables(market):
    r = analyze(market)
    md = reports_to_markdown([("x", r)])
    assert md.splitlines()[0].count("|") == len(TABLE_COLUMNS) + 2
    csv = reports_to_csv([("x", r)]).splitlines()
    assert csv[0].split(",")[1:] == [c for c, _ in TABLE_COLUMNS]


def test_estimator_api(market):
    est = EmpiricalPoA(grid_points=50, mode="joint")
    assert clone(est).get_params() == est.get_params()
    assert est.fit(market).score() == est.report_.inv_epoa1
    with pytest.raises(ValueError):
        EmpiricalPoA(mode="bogus").fit(market)


def test_bootstrap_degenerate_on_identical_records():
    ds = make_dataset(np.tile([[1.0, 0.6, 0.2]], (20, 1)), alphas=(1.0, 0.5))
    cis, diag = bootstrap_ci(EmpiricalPoA(), ds, replicates=10)
    for ci in cis.values():
        assert ci.lower == ci.upper == pytest.approx(ci.point, rel=1e-12)
    assert diag["replicates_dropped_zero_revenue"] == 0


def test_bootstrap_percentiles_and_determinism(market):
    ds = market.take(np.arange(60))
    est = EmpiricalPoA(grid_points=30)
    cis, _ = bootstrap_ci(est, ds, replicates=12, level=0.8, seed=5, statistics=("mu1",))
    again, _ = bootstrap_ci(est, ds, replicates=12, level=0.8, seed=5, statistics=("mu1",), n_jobs=2)
    assert cis == again
    vals = []
    for r in range(12):
        idx = np.random.default_rng([5, r]).integers(0, ds.T, ds.T)
        vals.append(clone(est).set_params(diagnostics=False).fit(ds.take(idx)).report_.mu1)
    lo, hi = np.percentile(vals, [10, 90])
    assert cis["mu1"].lower == pytest.approx(lo, rel=1e-12)
    assert cis["mu1"].upper == pytest.approx(hi, rel=1e-12)
    assert cis["mu1"].lower <= cis["mu1"].upper


def test_bootstrap_drops_zero_revenue_replicates():
    bids = np.zeros((15, 2))
    bids[:, 0] = 1.0
    bids[0, 1] = 0.5  # the only contested auction
    ds = make_dataset(bids)
    _, diag = bootstrap_ci(EmpiricalPoA(), ds, replicates=20, seed=1)
    assert diag["replicates_dropped_zero_revenue"] > 0


def test_bootstrap_needs_replicates(market):
    with pytest.raises(ValueError):
        bootstrap_ci(EmpiricalPoA(), market, replicates=5)


def test_compare_single_record_degenerates():
    ds = make_dataset([[1.0, 0.6, 0.3]], alphas=(1.0, 0.5))
    out = compare_correlation_modes(EmpiricalPoA(), ds, replicates=10)
    assert out["report_joint"].epoa_bound == pytest.approx(out["report_independent"].epoa_bound, rel=1e-12)
    assert out["ordering_holds"]


def test_compare_iid_bids_agree(market):
    out = compare_correlation_modes(EmpiricalPoA(grid_points=40), market, replicates=10)
    assert abs(out["difference"]) <= max(out["tolerance"], 0.05)
    assert set(out) >= {"report_joint", "report_independent", "ordering_holds", "tolerance"}
