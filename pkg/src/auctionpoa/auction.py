"""Generalized second price position auction mechanics.

Scalar routines (`rank_bidders`, `run_gsp`, `opt_assignment`) operate on one
bid profile and context. `position_outcomes` is the vectorized counterpart
used by the estimators: it evaluates one bidder's allocation and payment for
many own bids against many (opponent bids, context) rows at once.

Mainline slots must form a prefix ``0 .. L-1`` of the slot order. A bidder
takes a mainline slot when its rank score clears the mainline reserve and
fewer than ``min(L, mainline_cap)`` mainline slots are filled; otherwise it
takes the best remaining non-mainline slot. Rank-score ties go to the lower
bidder index. A zero bid never participates.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import MalformedContext

PRICING_MODES = ("gsp", "first")


@dataclass(frozen=True)
class AuctionContext:
    scores: tuple
    qualities: tuple
    slot_ctrs: tuple
    reserve: float = 0.0
    mainline_reserve: Optional[float] = None
    mainline_slots: tuple = ()
    mainline_cap: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        object.__setattr__(self, "qualities", tuple(float(g) for g in self.qualities))
        object.__setattr__(self, "slot_ctrs", tuple(float(a) for a in self.slot_ctrs))
        object.__setattr__(self, "reserve", float(self.reserve))
        if self.mainline_reserve is None:
            object.__setattr__(self, "mainline_reserve", self.reserve)
        else:
            object.__setattr__(self, "mainline_reserve", float(self.mainline_reserve))
        object.__setattr__(self, "mainline_slots", tuple(int(j) for j in self.mainline_slots))
        if self.mainline_cap is None:
            object.__setattr__(self, "mainline_cap", len(self.mainline_slots))
        else:
            object.__setattr__(self, "mainline_cap", int(self.mainline_cap))

    @property
    def n_bidders(self):
        return len(self.scores)

    @property
    def n_slots(self):
        return len(self.slot_ctrs)

    @property
    def mainline_len(self):
        return len(self.mainline_slots)

    def validate(self, record_id=None):
        """Raise `MalformedContext` if any context invariant fails."""
        rid = record_id

        def fail(reason):
            raise MalformedContext(rid, reason)

        if len(self.qualities) != len(self.scores):
            fail("scores and qualities differ in length")
        if not all(np.isfinite(s) and s > 0 for s in self.scores):
            fail("scores must be finite and positive")
        if not all(0.0 <= g <= 1.0 for g in self.qualities):
            fail("qualities must lie in [0, 1]")
        a = self.slot_ctrs
        if any(x < 0 or not np.isfinite(x) for x in a):
            fail("slot CTRs must be finite and non-negative")
        if any(a[j] < a[j + 1] for j in range(len(a) - 1)):
            fail("slot CTRs must be non-increasing")
        if not (0.0 <= self.reserve <= self.mainline_reserve):
            fail("reserves must satisfy 0 <= reserve <= mainline_reserve")
        if len(self.mainline_slots) > len(a):
            fail("more mainline slots than slots")
        if self.mainline_slots != tuple(range(len(self.mainline_slots))):
            fail("mainline slots must be a prefix 0..L-1 of the slot order")
        if self.mainline_cap < 0:
            fail("mainline_cap must be non-negative")
        return self


@dataclass(frozen=True)
class BidProfile:
    bids: tuple

    def __post_init__(self):
        object.__setattr__(self, "bids", tuple(float(b) for b in self.bids))
        if any(not np.isfinite(b) or b < 0 for b in self.bids):
            raise ValueError("bids must be finite and non-negative")

    def __len__(self):
        return len(self.bids)


@dataclass(frozen=True)
class AuctionOutcome:
    assignment: dict          # slot index -> bidder index
    allocation: tuple
    ppc: tuple
    payment: tuple
    welfare_contrib: Optional[tuple] = None
    slot_of: dict = field(default_factory=dict)

    @property
    def revenue(self):
        return float(sum(self.payment))

    @property
    def welfare(self):
        if self.welfare_contrib is None:
            return None
        return float(sum(self.welfare_contrib))


def _as_bids(bids):
    return bids.bids if isinstance(bids, BidProfile) else tuple(float(b) for b in bids)


def rank_bidders(bids, ctx: AuctionContext):
    """Bidders with a positive bid and rank score at least the reserve,
    sorted by rank score descending, ties to the lower index."""
    b = _as_bids(bids)
    q = [s * x for s, x in zip(ctx.scores, b)]
    eligible = [i for i in range(len(b)) if b[i] > 0 and q[i] >= ctx.reserve]
    return sorted(eligible, key=lambda i: (-q[i], i))


def run_gsp(bids, ctx: AuctionContext, pricing="gsp", values=None) -> AuctionOutcome:
    if pricing not in PRICING_MODES:
        raise ValueError(f"unknown pricing mode {pricing!r}")
    ctx.validate()
    b = _as_bids(bids)
    if len(b) != ctx.n_bidders:
        raise MalformedContext(None, "bid profile and context differ in bidder count")
    n = len(b)
    q = [s * x for s, x in zip(ctx.scores, b)]
    ranked = rank_bidders(b, ctx)

    main_capacity = min(ctx.mainline_len, ctx.mainline_cap)
    main_filled = 0
    next_side = ctx.mainline_len
    alloc = [0.0] * n
    ppc = [0.0] * n
    assignment = {}
    slot_of = {}
    for pos, i in enumerate(ranked):
        if q[i] >= ctx.mainline_reserve and main_filled < main_capacity:
            slot = main_filled
            main_filled += 1
        else:
            slot = next_side
            next_side += 1
        if slot >= ctx.n_slots:
            continue
        assignment[slot] = i
        slot_of[i] = slot
        alloc[i] = ctx.slot_ctrs[slot] * ctx.qualities[i]
        if pricing == "first":
            ppc[i] = b[i]
        else:
            q_next = q[ranked[pos + 1]] if pos + 1 < len(ranked) else 0.0
            floor = ctx.mainline_reserve if slot < ctx.mainline_len else 0.0
            ppc[i] = max(q_next, ctx.reserve, floor) / ctx.scores[i]
    payment = tuple(p * x for p, x in zip(ppc, alloc))
    contrib = None
    if values is not None:
        contrib = tuple(float(v) * x for v, x in zip(values, alloc))
    return AuctionOutcome(assignment, tuple(alloc), tuple(ppc), payment, contrib, slot_of)


def opt_assignment(values, ctx: AuctionContext):
    """Welfare-maximizing slot assignment ignoring reserves.

    Returns ``(assignment, welfare)`` with assignment mapping slot -> bidder.
    Greedy by ``quality * value`` is exact because slot CTRs are sorted.
    """
    w = np.asarray(ctx.qualities, dtype=float) * np.asarray(values, dtype=float)
    order = np.argsort(-w, kind="stable")
    assignment = {}
    welfare = 0.0
    for j, i in enumerate(order[: ctx.n_slots]):
        assignment[j] = int(i)
        welfare += ctx.slot_ctrs[j] * w[i]
    return assignment, float(welfare)


def position_outcomes(
    bidder: int,
    own_bids,
    bids: np.ndarray,
    scores: np.ndarray,
    qualities: np.ndarray,
    alphas: np.ndarray,
    reserve: np.ndarray,
    mainline_reserve: np.ndarray,
    mainline_len: np.ndarray,
    mainline_cap: np.ndarray,
    pricing: str = "gsp",
    chunk_elems: int = 4_000_000,
):
    """Allocation and payment of `bidder` for each own bid against each row.

    `bids`, `scores`, `qualities` are (T, n); `alphas` is (T, m) padded with
    zeros; the reserve and mainline arrays are (T,). `own_bids` is either a
    (K,) vector shared by all rows or a (T, K) array. Returns two (T, K)
    arrays. Row t uses the opponent bids and context of row t; the entry in
    column `bidder` of `bids` is ignored.
    """
    bids = np.asarray(bids, dtype=float)
    T, n = bids.shape
    own = np.asarray(own_bids, dtype=float)
    if own.ndim == 1:
        own = np.broadcast_to(own, (T, own.shape[0]))
    K = own.shape[1]
    m = alphas.shape[1]
    opp = np.array([j for j in range(n) if j != bidder], dtype=int)
    lower = opp < bidder

    alloc = np.empty((T, K))
    pay = np.empty((T, K))
    step = max(1, chunk_elems // max(1, K * max(1, len(opp))))
    for lo in range(0, T, step):
        sl = slice(lo, min(T, lo + step))
        r = reserve[sl][:, None]
        rm = mainline_reserve[sl][:, None]
        s_i = scores[sl, bidder][:, None]
        q = s_i * own[sl]
        ob = bids[sl][:, opp]
        Q = scores[sl][:, opp] * ob
        elig = (ob > 0) & (Q >= r)
        Qe = np.where(elig, Q, -np.inf)[:, None, :]
        qq = q[:, :, None]
        ahead = (Qe > qq) | ((Qe == qq) & lower)
        k = ahead.sum(axis=-1)
        a_main = (ahead & (Q >= rm)[:, None, :]).sum(axis=-1)
        behind = np.where(ahead, 0.0, np.maximum(Qe, 0.0)).max(axis=-1, initial=0.0)

        L = mainline_len[sl][:, None]
        c = np.minimum(L, mainline_cap[sl][:, None])
        passes_main = q >= rm
        slot = np.where(
            passes_main,
            np.where(k < c, k, L + k - c),
            L + k - np.minimum(a_main, c),
        )
        in_main = passes_main & (k < c)
        assigned = (own[sl] > 0) & (q >= r) & (slot < m)
        a = np.take_along_axis(alphas[sl], np.minimum(slot, m - 1), axis=1)
        x = np.where(assigned, a * qualities[sl, bidder][:, None], 0.0)
        if pricing == "first":
            price = own[sl]
        else:
            floor = np.where(in_main, rm, 0.0)
            price = np.maximum(np.maximum(behind, r), floor) / s_i
        alloc[sl] = x
        pay[sl] = np.where(assigned, x * price, 0.0)
    return alloc, pay
