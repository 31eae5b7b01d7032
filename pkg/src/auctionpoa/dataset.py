"""Auction logs: loading, validation, padding, serialization and summaries."""
import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .auction import PRICING_MODES, AuctionContext, BidProfile, position_outcomes
from .exceptions import MalformedContext, ParseError, ValidationError

CAP_MARGIN = 1.01


@dataclass(frozen=True)
class AuctionRecord:
    auction_id: str
    context: AuctionContext
    bids: BidProfile


@dataclass(frozen=True)
class DatasetSummary:
    bidder_ids: tuple
    mean_bid: tuple
    mean_quality: tuple
    mean_revenue: tuple
    revenue: float

    def as_dict(self):
        return {
            "bidders": [
                {"id": b, "mean_bid": mb, "mean_quality": mq, "mean_revenue": mr}
                for b, mb, mq, mr in zip(self.bidder_ids, self.mean_bid, self.mean_quality, self.mean_revenue)
            ],
            "revenue": self.revenue,
        }


def _fsum_mean(values):
    values = list(values)
    return math.fsum(values) / len(values)


class AuctionDataset:
    """Immutable collection of T auctions over a fixed roster of n bidders.

    Stored column-wise: ``bids``, ``scores``, ``qualities`` are (T, n);
    ``alphas`` is (T, m) zero-padded, ``n_slots`` keeps each record's own
    slot count. Absent bidders carry bid 0 and their roster-wide mean score
    and quality.
    """

    def __init__(self, auction_ids, bidder_ids, bids, scores, qualities, alphas, n_slots,
                 reserve, mainline_reserve, mainline_len, mainline_cap,
                 bid_cap=None, grid_spec=None, value_cap=None, pricing="gsp", padded=None):
        self.auction_ids = tuple(str(a) for a in auction_ids)
        self.bidder_ids = tuple(str(b) for b in bidder_ids)
        self.bids = np.array(bids, dtype=float, ndmin=2)
        self.scores = np.array(scores, dtype=float, ndmin=2)
        self.qualities = np.array(qualities, dtype=float, ndmin=2)
        self.alphas = np.array(alphas, dtype=float, ndmin=2)
        self.n_slots = np.array(n_slots, dtype=int)
        self.reserve = np.array(reserve, dtype=float)
        self.mainline_reserve = np.array(mainline_reserve, dtype=float)
        self.mainline_len = np.array(mainline_len, dtype=int)
        self.mainline_cap = np.array(mainline_cap, dtype=int)
        self.grid_spec = grid_spec
        self.value_cap = None if value_cap is None else float(value_cap)
        self.pricing = pricing
        self.padded = np.zeros_like(self.bids, dtype=bool) if padded is None else np.array(padded, dtype=bool)
        for arr in (self.bids, self.scores, self.qualities, self.alphas, self.n_slots,
                    self.reserve, self.mainline_reserve, self.mainline_len, self.mainline_cap, self.padded):
            arr.setflags(write=False)
        self._validate()
        self.bid_cap = self._auto_cap() if bid_cap is None else float(bid_cap)
        over = np.argwhere(self.bids > self.bid_cap)
        if len(over):
            t, i = over[0]
            raise ValidationError(self.auction_ids[t], f"bid {self.bids[t, i]} of bidder "
                                  f"{self.bidder_ids[i]!r} exceeds bid cap {self.bid_cap}")

    @property
    def T(self):
        return self.bids.shape[0]

    @property
    def n(self):
        return self.bids.shape[1]

    def _validate(self):
        T, n = self.bids.shape
        if T < 1:
            raise ValidationError(None, "dataset has no auctions")
        if len(self.auction_ids) != T or len(self.bidder_ids) != n:
            raise ValidationError(None, "id lists do not match array shapes")
        if len(set(self.bidder_ids)) != n:
            raise ValidationError(None, "duplicate bidder ids in roster")
        for name in ("scores", "qualities", "padded"):
            if getattr(self, name).shape != (T, n):
                raise ValidationError(None, f"{name} has shape {getattr(self, name).shape}, expected {(T, n)}")
        if self.alphas.shape[0] != T or self.alphas.shape[1] < 1:
            raise ValidationError(None, "alphas must be (T, m) with m >= 1")
        if self.pricing not in PRICING_MODES:
            raise ValidationError(None, f"unknown pricing mode {self.pricing!r}")
        bad = ~np.isfinite(self.bids) | (self.bids < 0)
        if bad.any():
            t = int(np.argwhere(bad)[0][0])
            raise ValidationError(self.auction_ids[t], "bids must be finite and non-negative")
        # Cheap vectorized screen; the per-record validator names the violated invariant.
        ok = (
            (self.scores > 0).all(axis=1)
            & ((self.qualities >= 0) & (self.qualities <= 1)).all(axis=1)
            & (np.diff(self.alphas, axis=1) <= 0).all(axis=1)
            & (self.alphas >= 0).all(axis=1)
            & (0 <= self.reserve) & (self.reserve <= self.mainline_reserve)
            & (self.mainline_len <= self.n_slots) & (self.mainline_cap >= 0)
            & (self.n_slots <= self.alphas.shape[1]) & (self.n_slots >= 0)
        )
        for t in np.flatnonzero(~ok):
            self.context(t).validate(self.auction_ids[t])
            raise MalformedContext(self.auction_ids[t], "context invariant violated")

    def _auto_cap(self):
        # Smallest bid (times a margin) that outranks every opponent and
        # clears both reserves even when bids and contexts are recombined.
        top_q = self.bids.max(axis=0) * self.scores.max(axis=0)
        floor = max(float(self.reserve.max()), float(self.mainline_reserve.max()))
        need = 0.0
        for i in range(self.n):
            others = np.delete(top_q, i)
            q_max = max(float(others.max()) if len(others) else 0.0, floor)
            need = max(need, q_max / float(self.scores[:, i].min()))
        need = max(need, float(self.bids.max()))
        return CAP_MARGIN * need if need > 0 else 1.0

    def context(self, t) -> AuctionContext:
        m = int(self.n_slots[t])
        return AuctionContext(
            scores=self.scores[t], qualities=self.qualities[t], slot_ctrs=self.alphas[t, :m],
            reserve=self.reserve[t], mainline_reserve=self.mainline_reserve[t],
            mainline_slots=range(int(self.mainline_len[t])), mainline_cap=int(self.mainline_cap[t]),
        )

    def record(self, t) -> AuctionRecord:
        return AuctionRecord(self.auction_ids[t], self.context(t), BidProfile(self.bids[t]))

    @property
    def records(self):
        return [self.record(t) for t in range(self.T)]

    def config(self):
        return {
            "bid_cap": self.bid_cap,
            "grid": self.grid_spec,
            "value_cap": self.value_cap,
            "pricing": self.pricing,
        }

    def arrays(self):
        """Keyword arguments for `position_outcomes`."""
        return dict(
            bids=self.bids, scores=self.scores, qualities=self.qualities, alphas=self.alphas,
            reserve=self.reserve, mainline_reserve=self.mainline_reserve,
            mainline_len=self.mainline_len, mainline_cap=self.mainline_cap, pricing=self.pricing,
        )

    def take(self, indices):
        """Dataset made of the records at `indices` (repeats allowed); same roster and cap."""
        idx = np.asarray(indices, dtype=int)
        return AuctionDataset(
            [self.auction_ids[t] for t in idx], self.bidder_ids, self.bids[idx], self.scores[idx],
            self.qualities[idx], self.alphas[idx], self.n_slots[idx], self.reserve[idx],
            self.mainline_reserve[idx], self.mainline_len[idx], self.mainline_cap[idx],
            bid_cap=self.bid_cap, grid_spec=self.grid_spec, value_cap=self.value_cap,
            pricing=self.pricing, padded=self.padded[idx],
        )

    @cached_property
    def realized_payments(self):
        """(T, n) payments from running the auction on each record as logged."""
        arrs = self.arrays()
        out = np.empty_like(self.bids)
        for i in range(self.n):
            _, pay = position_outcomes(i, self.bids[:, i:i + 1], **arrs)
            out[:, i] = pay[:, 0]
        out.setflags(write=False)
        return out

    @cached_property
    def realized_allocations(self):
        arrs = self.arrays()
        out = np.empty_like(self.bids)
        for i in range(self.n):
            alloc, _ = position_outcomes(i, self.bids[:, i:i + 1], **arrs)
            out[:, i] = alloc[:, 0]
        out.setflags(write=False)
        return out

    def equals(self, other):
        if not isinstance(other, AuctionDataset):
            return False
        same = (self.auction_ids == other.auction_ids and self.bidder_ids == other.bidder_ids
                and self.bid_cap == other.bid_cap and self.value_cap == other.value_cap
                and self.pricing == other.pricing and self.grid_spec == other.grid_spec)
        if not same:
            return False
        names = ("bids", "scores", "qualities", "n_slots", "reserve", "mainline_reserve",
                 "mainline_len", "mainline_cap")
        if not all(np.array_equal(getattr(self, a), getattr(other, a)) for a in names):
            return False
        m = min(self.alphas.shape[1], other.alphas.shape[1])
        return (np.array_equal(self.alphas[:, :m], other.alphas[:, :m])
                and not self.alphas[:, m:].any() and not other.alphas[:, m:].any())


def revenue_per_record(ds: AuctionDataset):
    return ds.realized_payments.sum(axis=1)


def total_revenue(ds: AuctionDataset) -> float:
    """Average realized revenue per auction (exactly rounded summation)."""
    return math.fsum(ds.realized_payments.ravel()) / ds.T


def summarize(ds: AuctionDataset) -> DatasetSummary:
    pay = ds.realized_payments
    return DatasetSummary(
        bidder_ids=ds.bidder_ids,
        mean_bid=tuple(_fsum_mean(ds.bids[:, i]) for i in range(ds.n)),
        mean_quality=tuple(_fsum_mean(ds.qualities[:, i]) for i in range(ds.n)),
        mean_revenue=tuple(_fsum_mean(pay[:, i]) for i in range(ds.n)),
        revenue=total_revenue(ds),
    )


# ---------------------------------------------------------------- parsing

def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data


def _num(value, line, name):
    if isinstance(value, bool) or value is None:
        raise ParseError(line, f"{name} must be a number")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(line, f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ParseError(line, f"{name} must be finite")
    return out


def _context_fields(obj, defaults, line):
    get = lambda k: obj.get(k, defaults.get(k))  # noqa: E731
    alphas = get("alphas")
    if not isinstance(alphas, list) or not alphas:
        raise ParseError(line, "alphas must be a non-empty list")
    alphas = [_num(a, line, "alpha") for a in alphas]
    reserve = _num(get("reserve") if get("reserve") is not None else 0.0, line, "reserve")
    rm = get("mainline_reserve")
    rm = reserve if rm is None else _num(rm, line, "mainline_reserve")
    slots = get("mainline_slots") or []
    if not isinstance(slots, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in slots):
        raise ParseError(line, "mainline_slots must be a list of integers")
    cap = get("mainline_cap")
    cap = len(slots) if cap is None else cap
    if not isinstance(cap, int) or isinstance(cap, bool):
        raise ParseError(line, "mainline_cap must be an integer")
    return alphas, reserve, rm, slots, cap


def _assemble(rows, config, row_lines):
    """rows: list of (auction_id, ctx_fields, [(bidder_id, bid, score, quality), ...])."""
    roster = []
    seen = set()
    for _, _, bidders in rows:
        for bid_id, *_ in bidders:
            if bid_id not in seen:
                seen.add(bid_id)
                roster.append(bid_id)
    index = {b: i for i, b in enumerate(roster)}
    T, n = len(rows), len(roster)
    if T == 0:
        raise ValidationError(None, "dataset has no auctions")
    m = max(len(r[1][0]) for r in rows)
    bids = np.zeros((T, n))
    scores = np.full((T, n), np.nan)
    quals = np.full((T, n), np.nan)
    alphas = np.zeros((T, m))
    n_slots = np.zeros(T, dtype=int)
    reserve = np.zeros(T)
    rmain = np.zeros(T)
    mlen = np.zeros(T, dtype=int)
    mcap = np.zeros(T, dtype=int)
    ids = []
    for t, (aid, (a, r, rm, slots, cap), bidders) in enumerate(rows):
        ids.append(aid)
        alphas[t, : len(a)] = a
        n_slots[t] = len(a)
        reserve[t], rmain[t], mcap[t] = r, rm, cap
        if list(slots) != list(range(len(slots))):
            raise MalformedContext(aid, "mainline slots must be a prefix 0..L-1 of the slot order")
        mlen[t] = len(slots)
        present = set()
        for bid_id, b, s, g in bidders:
            if bid_id in present:
                raise ValidationError(aid, f"bidder {bid_id!r} appears twice")
            present.add(bid_id)
            i = index[bid_id]
            bids[t, i], scores[t, i], quals[t, i] = b, s, g
    padded = np.isnan(scores)
    with np.errstate(invalid="ignore"):
        score_mean = np.nanmean(scores, axis=0)
        qual_mean = np.nanmean(quals, axis=0)
    scores = np.where(padded, score_mean, scores)
    quals = np.where(padded, qual_mean, quals)
    return AuctionDataset(
        ids, roster, bids, scores, quals, alphas, n_slots, reserve, rmain, mlen, mcap,
        bid_cap=config.get("bid_cap"), grid_spec=config.get("grid"),
        value_cap=config.get("value_cap"), pricing=config.get("pricing", "gsp"), padded=padded,
    )


def _parse_jsonl(text, config):
    rows, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(lineno, "each line must be a JSON object")
        aid = obj.get("auction_id", str(len(rows)))
        ctx = _context_fields(obj, config, lineno)
        bidders = obj.get("bidders")
        if not isinstance(bidders, list):
            raise ParseError(lineno, "bidders must be a list")
        parsed = []
        for b in bidders:
            if not isinstance(b, dict) or "id" not in b:
                raise ParseError(lineno, "each bidder needs an id")
            parsed.append((str(b["id"]), _num(b.get("bid"), lineno, "bid"),
                           _num(b.get("score", 1.0), lineno, "score"),
                           _num(b.get("quality", 1.0), lineno, "quality")))
        rows.append((str(aid), ctx, parsed))
        lines.append(lineno)
    return _assemble(rows, config, lines)


def _parse_csv(text, config):
    reader = csv.DictReader(io.StringIO(text))
    need = {"auction_id", "bidder_id", "bid", "score", "quality"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise ParseError(1, f"CSV header must contain {sorted(need)}")
    overrides = config.get("auctions", {})
    order, groups = [], {}
    for lineno, row in enumerate(reader, start=2):
        aid = row["auction_id"]
        if aid not in groups:
            groups[aid] = []
            order.append((aid, lineno))
        groups[aid].append((row["bidder_id"], _num(row["bid"], lineno, "bid"),
                            _num(row["score"], lineno, "score"),
                            _num(row["quality"], lineno, "quality")))
    rows = []
    for aid, lineno in order:
        ctx = _context_fields(overrides.get(aid, {}), config, lineno)
        rows.append((aid, ctx, groups[aid]))
    return _assemble(rows, config, [ln for _, ln in order])


def load_dataset(source, format="jsonl", config: Optional[dict] = None) -> AuctionDataset:
    """Parse an auction log.

    `source` is a path, bytes, or a binary/text stream. `config` supplies
    dataset-wide settings (``bid_cap``, ``grid``, ``value_cap``, ``pricing``)
    and, for CSV, the auction context (``alphas``, ``reserve``,
    ``mainline_reserve``, ``mainline_slots``, ``mainline_cap``, optional
    per-auction ``auctions`` overrides).
    """
    config = dict(config or {})
    text = _read_text(source)
    if format == "jsonl":
        return _parse_jsonl(text, config)
    if format == "csv":
        return _parse_csv(text, config)
    raise ValueError(f"unknown format {format!r}")


def dump_jsonl(ds: AuctionDataset) -> str:
    """Serialize every record (padded bidders written explicitly)."""
    out = []
    for t in range(ds.T):
        m = int(ds.n_slots[t])
        L = int(ds.mainline_len[t])
        out.append(json.dumps({
            "auction_id": ds.auction_ids[t],
            "alphas": [float(a) for a in ds.alphas[t, :m]],
            "reserve": float(ds.reserve[t]),
            "mainline_reserve": float(ds.mainline_reserve[t]),
            "mainline_slots": list(range(L)),
            "mainline_cap": int(ds.mainline_cap[t]),
            "bidders": [
                {"id": b, "bid": float(ds.bids[t, i]), "score": float(ds.scores[t, i]),
                 "quality": float(ds.qualities[t, i])}
                for i, b in enumerate(ds.bidder_ids)
            ],
        }))
    return "\n".join(out) + "\n"
