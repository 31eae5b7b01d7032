"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import itertools
import json
import sys
import time

import numpy as np
import pytest

from auctionpoa import (AuctionDataset, EmpiricalPoA, SynthSpec, ZeroRevenue, analyze, bootstrap_ci,
                        build_thresholds, compare_correlation_modes, estimate_curves, gen_correlated,
                        gen_fpa_bne, gen_gsp_learning, lambda_concentration, rho)
from auctionpoa.cli import main as cli_main
from auctionpoa.covering import compute_covering, fixed_assignment_weights, linearized_values, tavg, tbar1
from auctionpoa.thresholds import ThresholdCurve

RESULTS = []


def report(n, ok, detail):
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


RHO_TABLE = {0.5: 1.271, 0.75: 1.421, 1: 1.582, 1.25: 1.752, 1.5: 1.931, 2: 2.313, 4: 4.075, 8: 8.003}
CONC_TABLE = {
    1: (1.302, 1.163, 1.072, 1.009),
    1.25: (1.506, 1.382, 1.304, 1.256),
    1.5: (1.717, 1.61, 1.545, 1.505),
    2: (2.157, 2.079, 2.032, 2.003),
    4: (4.037, 4.019, 4.007, 4.001),
    8: (8.001, 8.001, 8.0, 8.0),
}


def test_criterion_1_rho_table():
    rho(1.0)
    t = time.perf_counter()
    got = {mu: rho(mu) for mu in RHO_TABLE}
    dt = time.perf_counter() - t
    err = max(abs(got[mu] - want) for mu, want in RHO_TABLE.items())
    ok = report(1, err <= 0.002 and dt < 1e-3, f"rho table max error {err:.2e} (tol 2e-3), {dt * 1e3:.3f} ms")
    assert ok


def test_criterion_2_concentration_table():
    t = time.perf_counter()
    errs = [abs(lambda_concentration(mu, k) - want)
            for mu, row in CONC_TABLE.items() for k, want in zip((2, 4, 10, 100), row)]
    dt = time.perf_counter() - t
    ok = report(2, max(errs) <= 0.003 and dt < 0.1,
                f"{len(errs)} table cells, max error {max(errs):.2e} (tol 3e-3), {dt * 1e3:.1f} ms")
    assert ok


def random_market(seed, T):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 7)), int(rng.integers(1, 5))
    bids = rng.uniform(0, 1, (T, n)) * (rng.uniform(size=(T, n)) > 0.1)
    scores = rng.uniform(0.5, 1.5, (T, n))
    quals = rng.uniform(0.1, 1, (T, n))
    alphas = np.tile(-np.sort(-rng.uniform(0.1, 1, m)), (T, 1))
    r = float(rng.choice([0.0, 0.05, 0.2]))
    L = int(rng.integers(0, m + 1))
    return AuctionDataset(
        [str(t) for t in range(T)], [f"b{i}" for i in range(n)], bids, scores, quals, alphas,
        np.full(T, m), np.full(T, r), np.full(T, r + float(rng.choice([0.0, 0.3]))),
        np.full(T, L), np.full(T, int(rng.integers(1, L + 1)) if L else m),
    )


def test_criterion_3_ordering_chain():
    t = time.perf_counter()
    done = seed = 0
    fail_avg_lb = fail_lb_bar = fail_avg_bar = 0
    while done < 200:
        ds = random_market(seed, 500)
        seed += 1
        try:
            cov = compute_covering(ds, build_thresholds(estimate_curves(ds), ds))
        except ZeroRevenue:
            continue
        done += 1
        tol = 1e-9 * max(abs(cov.tbar1), 1e-300)
        fail_avg_lb += cov.tavg > cov.lb_t + tol
        fail_lb_bar += cov.lb_t > cov.tbar1 + tol
        fail_avg_bar += cov.tavg > cov.tbar1 + tol
    dt = time.perf_counter() - t
    ok = fail_avg_lb == 0 and fail_lb_bar == 0 and dt < 60
    report(3, ok, f"200 datasets in {dt:.1f} s; violations: T_avg<=LB-T {fail_avg_lb}, "
                  f"LB-T<=Tbar1 {fail_lb_bar}, T_avg<=Tbar1 {fail_avg_bar}")
    assert ok, "T_avg <= LB-T does not hold on every dataset (both are lower bounds on T; neither dominates)"


def _brute(weights, alphas):
    n, m = len(weights), len(alphas)
    best = 0.0
    for k in range(min(n, m) + 1):
        for perm in itertools.permutations(range(n), k):
            best = max(best, sum(alphas[j] * weights[i] for j, i in enumerate(perm)))
    return best


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n, m, T = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 6))
        q = rng.uniform(0, 1, (T, n))
        alphas = np.tile(-np.sort(-rng.uniform(0, 1, m)), (T, 1))
        ds = AuctionDataset([str(i) for i in range(T)], [str(i) for i in range(n)], rng.uniform(0, 1, (T, n)),
                            np.ones((T, n)), q, alphas, np.full(T, m), np.zeros(T), np.zeros(T),
                            np.zeros(T, dtype=int), np.full(T, m))
        xbar = (alphas[:, :1] * q).mean(axis=0)
        th = []
        for i in range(n):
            k = int(rng.integers(1, 4))
            lv = np.sort(rng.uniform(0.05, 1, k)) * xbar[i]
            lv[-1] = xbar[i]
            th.append(ThresholdCurve.from_levels(lv, rng.uniform(0, 2, k), max_alloc=xbar[i]) if xbar[i] > 0 else None)
        v = linearized_values(th)
        want = np.mean([_brute(q[t_] * v, alphas[t_]) for t_ in range(T)])
        worst = max(worst, abs(tbar1(ds, th) - want))
        w = fixed_assignment_weights(ds, th)
        best = max((sum(w[i, j] for i, j in zip(who, slots))
                    for k in range(min(n, m) + 1)
                    for slots in itertools.permutations(range(m), k)
                    for who in itertools.combinations(range(n), k)), default=0.0)
        worst = max(worst, abs(tavg(ds, th) - best))
    dt = time.perf_counter() - t
    ok = report(4, worst <= 1e-12 and dt < 10, f"100 instances, max |greedy/matching - brute force| {worst:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_5_bound_validity():
    t = time.perf_counter()
    worst = np.inf
    runs = 0
    for j in range(20):
        n = (2, 3, 5)[j % 3]
        ds, truth = gen_fpa_bne(SynthSpec(kind="fpa", n=n, T=2000, seed=100 + j, alphas=(1.0,)))
        r = analyze(ds, diagnostics=False)
        worst = min(worst, truth.ratio - (r.inv_epoa1 - truth.eps_regret))
        runs += 1
    for j in range(10):
        spec = SynthSpec(kind="gsp_learning", n=3, T=5000, seed=200 + j, alphas=(1.0, 0.6),
                         qualities={"uniform": [0.5, 1.0]})
        ds, truth = gen_gsp_learning(spec)
        r = analyze(ds, diagnostics=False)
        worst = min(worst, truth.ratio - (r.inv_epoa1 - truth.eps_regret))
        runs += 1
    dt = time.perf_counter() - t
    ok = report(5, worst >= 0 and dt < 300,
                f"{runs} runs, min slack ratio - (1/bound - eps_regret) = {worst:.4f}, {dt:.1f} s")
    assert ok


def test_criterion_6_correlation_ordering():
    t = time.perf_counter()
    holds = 0
    for seed in range(20):
        ds = gen_correlated(SynthSpec(kind="correlated", n=3, T=2000, seed=seed, omega=0.7,
                                      qualities={"uniform": [0.5, 1.0]}))
        out = compare_correlation_modes(EmpiricalPoA(diagnostics=False), ds, replicates=20, seed=seed)
        holds += out["ordering_holds"]
    dt = time.perf_counter() - t
    ok = report(6, holds >= 18 and dt < 600, f"ordering holds in {holds}/20 seeds (need 18), {dt:.1f} s")
    assert ok


def test_criterion_7_convergence_trend():
    t = time.perf_counter()
    medians = []
    for T in (100, 1000, 10000):
        widths = []
        for seed in range(5):
            ds = gen_correlated(SynthSpec(kind="correlated", n=3, T=T, seed=seed, omega=0.5,
                                          qualities={"uniform": [0.5, 1.0]}))
            cis, _ = bootstrap_ci(EmpiricalPoA(diagnostics=False), ds, replicates=20, seed=seed,
                                  statistics=("mu1",))
            widths.append(cis["mu1"].upper - cis["mu1"].lower)
        medians.append(float(np.median(widths)))
    dt = time.perf_counter() - t
    ok = medians[0] > medians[1] > medians[2] and dt < 600
    report(7, ok, "median mu1 CI width " + " > ".join(f"{w:.4f}" for w in medians) + f" (T=100,1000,10000), {dt:.1f} s")
    assert ok


def test_criterion_8_determinism(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "gsp_learning", "n": 3, "T": 400, "seed": 9, "alphas": [1.0, 0.5],
                                "qualities": {"uniform": [0.5, 1.0]}}))
    assert cli_main(["synth", str(spec), "--out", str(tmp_path / "data")]) == 0
    data = str(tmp_path / "data" / "dataset.jsonl")
    outs = []
    for k, threads in enumerate((1, 1, 4)):
        out = tmp_path / f"run{k}"
        code = cli_main(["epoa", data, "--seed", "3", "--mode", "both", "--bootstrap", "10",
                         "--threads", str(threads), "--out", str(out), "--format", "md"])
        assert code == 0
        outs.append(tuple((out / f).read_bytes() for f in ("report_joint.json", "report_independent.json",
                                                          "comparison.json", "report.md")))
    ok = report(8, outs[0] == outs[1] == outs[2], "cmd_epoa reports byte-identical across 2 runs and --threads 1/4")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
