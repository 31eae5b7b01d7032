import itertools

import numpy as np
import pytest

from auctionpoa import AuctionContext, AuctionDataset, run_gsp


def make_dataset(bids, alphas=(1.0,), qualities=None, scores=None, reserve=0.0, mainline_reserve=None,
                 mainline_len=0, mainline_cap=None, **kw):
    bids = np.atleast_2d(np.asarray(bids, dtype=float))
    T, n = bids.shape
    q = np.ones((T, n)) if qualities is None else np.broadcast_to(qualities, (T, n))
    s = np.ones((T, n)) if scores is None else np.broadcast_to(scores, (T, n))
    a = np.atleast_2d(np.asarray(alphas, dtype=float))
    a = np.broadcast_to(a, (T, a.shape[1]))
    m = a.shape[1]
    rm = reserve if mainline_reserve is None else mainline_reserve
    return AuctionDataset(
        [f"a{t}" for t in range(T)], [f"b{i}" for i in range(n)], bids, s, q, a, np.full(T, m),
        np.full(T, reserve), np.full(T, rm), np.full(T, mainline_len),
        np.full(T, m if mainline_cap is None else mainline_cap), **kw,
    )


def random_dataset(rng, T=20, n=None, m=None, mainline=False, reserve=None):
    n = int(rng.integers(1, 6)) if n is None else n
    m = int(rng.integers(1, 4)) if m is None else m
    bids = rng.uniform(0, 2, (T, n)) * (rng.uniform(size=(T, n)) > 0.15)
    bids = np.round(bids, 1)  # force some ties
    scores = rng.uniform(0.5, 1.5, (T, n))
    quals = rng.uniform(0.1, 1, (T, n))
    alphas = -np.sort(-rng.uniform(0.1, 1, m))
    r = float(rng.choice([0.0, 0.3])) if reserve is None else reserve
    kw = {}
    if mainline:
        L = int(rng.integers(0, m + 1))
        kw = dict(mainline_reserve=r + float(rng.choice([0.0, 0.5])), mainline_len=L,
                  mainline_cap=int(rng.integers(0, L + 1)))
    return make_dataset(bids, alphas, quals, scores, reserve=r, **kw)


def scalar_curves(ds, grid):
    """Counterfactual averages by looping over records with the scalar auction."""
    G = len(grid)
    alloc = np.zeros((ds.n, G))
    pay = np.zeros((ds.n, G))
    for t in range(ds.T):
        ctx = ds.context(t)
        for i in range(ds.n):
            for g, b in enumerate(grid):
                bids = list(ds.bids[t])
                bids[i] = b
                out = run_gsp(bids, ctx, pricing=ds.pricing)
                alloc[i, g] += out.allocation[i]
                pay[i, g] += out.payment[i]
    return alloc / ds.T, pay / ds.T


def brute_force_assignment(weights, alphas):
    """max over injective slot->bidder maps of sum alpha_j * w_{pi(j)}."""
    n = len(weights)
    m = len(alphas)
    best = 0.0
    for k in range(min(n, m) + 1):
        for perm in itertools.permutations(range(n), k):
            best = max(best, sum(alphas[j] * weights[i] for j, i in enumerate(perm)))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_auction_ds():
    # bidder b0 faces opponent bids 1 and 3
    return make_dataset([[0.5, 1.0], [0.5, 3.0]], bid_cap=4.0, grid_spec=[2.0])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
