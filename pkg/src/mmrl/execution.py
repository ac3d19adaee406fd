"""Limit-order execution against an adverse-selection-aware fill model.

Per step the strategy may rest one unit order at the best bid or ask. A fill
comes from one of two sources:

* adverse: the midprice moves through the posted quote (ask fills when the
  next ask is higher, bid fills when the next bid is lower);
* non-adverse: a market order arrives on that side and an independent
  Bernoulli(p) thinning draw succeeds.

The two are combined with a per-side max, so at most one contract trades per
side per step, and fills always settle at the time-t quote.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Quote:
    bid: float
    ask: float

    @property
    def spread(self) -> float:
        return self.ask - self.bid


@dataclass(frozen=True)
class PostingDecision:
    """Unit limit-order posting flags; at most one side per step."""

    post_ask: int = 0
    post_bid: int = 0

    def __post_init__(self):
        if self.post_ask not in (0, 1) or self.post_bid not in (0, 1):
            raise ValueError("posting flags must be 0 or 1")
        if self.post_ask and self.post_bid:
            raise ValueError("at most one side may be posted per step")


@dataclass(frozen=True)
class MarketOrderArrivals:
    m_plus: int = 0   # buy market order (hits the ask)
    m_minus: int = 0  # sell market order (hits the bid)


@dataclass(frozen=True)
class FillOutcome:
    ask_fill: int = 0
    bid_fill: int = 0
    ask_adverse: int = 0
    bid_adverse: int = 0
    ask_nonadverse: int = 0
    bid_nonadverse: int = 0


@dataclass(frozen=True)
class LedgerState:
    """Inventory, cash, and cumulative fill counters (unit order size)."""

    inventory: int = 0
    cash: float = 0.0
    n_plus: int = 0   # cumulative ask-side (sell) fills
    n_minus: int = 0  # cumulative bid-side (buy) fills
    afa: int = 0
    afb: int = 0
    nfa: int = 0
    nfb: int = 0


def derive_quotes(P: float, delta: float) -> Quote:
    """Best bid/ask a half-spread either side of the midprice."""
    if delta <= 0:
        raise ValueError(f"spread must be positive, got {delta}")
    return Quote(bid=P - delta / 2.0, ask=P + delta / 2.0)


@dataclass(frozen=True)
class ArrivalConfig:
    p_mo_plus: float = 0.5
    p_mo_minus: float = 0.5

    def __post_init__(self):
        for p in (self.p_mo_plus, self.p_mo_minus):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"arrival probability {p} outside [0, 1]")


def sample_market_orders(model: ArrivalConfig,
                         rng: np.random.Generator) -> MarketOrderArrivals:
    """Independent Bernoulli arrivals per side; always two draws (buy, sell)
    so the stream stays aligned regardless of outcomes."""
    u_plus = rng.random()
    u_minus = rng.random()
    return MarketOrderArrivals(m_plus=int(u_plus < model.p_mo_plus),
                               m_minus=int(u_minus < model.p_mo_minus))


def adverse_fill_indicators(posting: PostingDecision, quote_t: Quote,
                            quote_t1: Quote) -> tuple[int, int]:
    """Adverse fill per side: posted and the price moved through the quote."""
    ask_adverse = posting.post_ask * int(quote_t.ask < quote_t1.ask)
    bid_adverse = posting.post_bid * int(quote_t.bid > quote_t1.bid)
    return ask_adverse, bid_adverse


def nonadverse_fill_indicators(posting: PostingDecision,
                               arrivals: MarketOrderArrivals, p: float,
                               rng: np.random.Generator) -> tuple[int, int]:
    """Non-adverse fill: posted, matching market order arrived, and the
    Bernoulli(p) thinning succeeded.

    Always consumes two uniforms (ask side first, then bid) so scripted
    replays can reproduce the thinning stream independently of postings.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"fill probability {p} outside [0, 1]")
    u_ask = rng.random()
    u_bid = rng.random()
    ask = posting.post_ask * arrivals.m_plus * int(u_ask < p)
    bid = posting.post_bid * arrivals.m_minus * int(u_bid < p)
    return ask, bid


def combine_fills(adverse: tuple[int, int], nonadverse: tuple[int, int]) -> FillOutcome:
    """Per-side max of the two fill sources (no double counting)."""
    ask_adverse, bid_adverse = adverse
    ask_nonadverse, bid_nonadverse = nonadverse
    return FillOutcome(
        ask_fill=max(ask_adverse, ask_nonadverse),
        bid_fill=max(bid_adverse, bid_nonadverse),
        ask_adverse=ask_adverse,
        bid_adverse=bid_adverse,
        ask_nonadverse=ask_nonadverse,
        bid_nonadverse=bid_nonadverse,
    )


def apply_fills(ledger: LedgerState, fills: FillOutcome, P: float,
                delta: float) -> LedgerState:
    """Settle fills at the time-t quotes: sell at P + delta/2, buy at P - delta/2."""
    n_plus = ledger.n_plus + fills.ask_fill
    n_minus = ledger.n_minus + fills.bid_fill
    cash = (ledger.cash
            + (P + delta / 2.0) * fills.ask_fill
            - (P - delta / 2.0) * fills.bid_fill)
    return replace(
        ledger,
        inventory=n_minus - n_plus,
        cash=cash,
        n_plus=n_plus,
        n_minus=n_minus,
        afa=ledger.afa + fills.ask_adverse,
        afb=ledger.afb + fills.bid_adverse,
        nfa=ledger.nfa + fills.ask_nonadverse,
        nfb=ledger.nfb + fills.bid_nonadverse,
    )


def wealth(ledger: LedgerState, P: float) -> float:
    """Mark-to-market wealth: inventory at midprice plus cash."""
    return ledger.inventory * P + ledger.cash
