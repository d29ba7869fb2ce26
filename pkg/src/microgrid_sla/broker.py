"""Power broker: SLA pricing, allocation, contract book, enforcement and settlement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

KWH = 3.6e6  # joules per kWh; W * s / KWH = kWh


@dataclass(frozen=True)
class SupplyContext:
    P_re: float
    P_grid: float
    fit: float
    get: float
    second_of_day: int = 0
    day_of_year: int = 1
    t: int = 0

    @property
    def available(self) -> float:
        return self.P_re + self.P_grid


class Contract:
    __slots__ = ("id", "load_id", "power", "duration", "unit_price", "start",
                 "remaining", "active", "end", "end_reason", "refund")

    def __init__(self, cid: int, load_id: int, power: float, duration: int, unit_price: float, start: int):
        self.id = cid
        self.load_id = load_id
        self.power = power
        self.duration = duration
        self.unit_price = unit_price
        self.start = start
        self.remaining = duration
        self.active = True
        self.end: int | None = None
        self.end_reason: str | None = None
        self.refund = 0.0

    def __repr__(self):
        return (f"Contract(id={self.id}, load={self.load_id}, power={self.power}, "
                f"duration={self.duration}, price={self.unit_price}, remaining={self.remaining})")


class SlaBook:
    """Active contracts in signing order plus the full contract log."""

    def __init__(self):
        self.active: list[Contract] = []
        self.log: list[Contract] = []

    @property
    def committed(self) -> float:
        return sum(c.power for c in self.active)

    def __len__(self) -> int:
        return len(self.active)

    def sign(self, load_id: int, power: float, duration: int, unit_price: float, t: int) -> Contract:
        c = Contract(len(self.log), load_id, power, duration, unit_price, t)
        self.active.append(c)
        self.log.append(c)
        return c


class StepLedger(NamedTuple):
    t: int
    P_re: float
    P_grid: float
    committed: float
    income_ugrid: float
    income_feedin: float
    cost_supply: float
    cost_reimb: float
    n_contracts: int
    consumed: float
    grid_drawn: float
    fed_in: float
    fit: float
    get: float


LEDGER_COLUMNS = StepLedger._fields


def base_price(P_s: float, P_re: float, fit: float, get: float) -> float:
    """Unit cost (EUR/kWh) of supplying ``P_s`` watts, PV first and grid for the rest."""
    if P_s <= P_re:
        return fit
    return (P_re * fit + (P_s - P_re) * get) / P_s


class BrokerPolicy(Protocol):
    name: str

    def prices(self, ctx: SupplyContext, book: SlaBook, durations: Sequence[int]) -> Sequence[float]:
        ...


@dataclass(frozen=True)
class OptimisticPolicy:
    """Same price for every duration."""

    reference_increment: float = 1000.0
    name: str = "optimistic"

    def prices(self, ctx, book, durations):
        p0 = base_price(book.committed + self.reference_increment, ctx.P_re, ctx.fit, ctx.get)
        return (p0,) * len(durations)


@dataclass(frozen=True)
class PessimisticPolicy:
    """Price grows linearly with duration, capped at ``p_cap``."""

    p_cap: float = 10.0
    reference_increment: float = 1000.0
    name: str = "pessimistic"

    def prices(self, ctx, book, durations):
        p0 = base_price(book.committed + self.reference_increment, ctx.P_re, ctx.fit, ctx.get)
        d_min = durations[0]
        return tuple(min(p0 * d / d_min, self.p_cap) for d in durations)


def price_vector(policy: BrokerPolicy, ctx: SupplyContext, book: SlaBook, durations: Sequence[int]) -> tuple[float, ...]:
    return tuple(policy.prices(ctx, book, durations))


def allocate(book: SlaBook, bids, prices: Sequence[float], durations: Sequence[int],
             ctx: SupplyContext, rng=None):
    """Grant bids in (seeded) random order while supply allows.

    ``bids`` holds ``(load_id, quantity_vector)`` pairs. Returns
    ``(granted, rejected)`` where granted is a list of new contracts and
    rejected a list of load ids.
    """
    order = list(bids)
    if rng is not None and len(order) > 1:
        rng.shuffle(order)
    committed = book.committed
    limit = ctx.available
    granted, rejected = [], []
    for load_id, qvec in order:
        k = next((i for i, q in enumerate(qvec) if q > 0), None)
        if k is None:
            continue
        power = qvec[k]
        if committed + power <= limit:
            granted.append(book.sign(load_id, power, durations[k], prices[k], ctx.t))
            committed += power
        else:
            rejected.append(load_id)
    return granted, rejected


def enforce(book: SlaBook, ctx: SupplyContext):
    """Terminate most-recent contracts until committed power fits the supply.

    Returns ``(reimbursement_eur, terminated_contracts)``. Each refund is the
    current supply cost of the contract's unexpired energy.
    """
    limit = ctx.available
    committed = book.committed
    total = 0.0
    terminated = []
    while committed > limit and book.active:
        c = book.active.pop()
        unit = base_price(committed, ctx.P_re, ctx.fit, ctx.get)
        c.refund = c.power * c.remaining / KWH * unit
        c.active = False
        c.end = ctx.t
        c.end_reason = "terminated"
        total += c.refund
        committed -= c.power
        terminated.append(c)
    return total, terminated


def settle_step(book: SlaBook, ctx: SupplyContext, consumed: float = 0.0,
                reimbursement: float = 0.0, dt: int = 1) -> StepLedger:
    """Book one step of income and cost, then age and expire contracts."""
    committed = 0.0
    income = 0.0
    for c in book.active:
        committed += c.power
        income += c.power * c.unit_price
    income = income * dt / KWH
    pv_used = consumed if consumed < ctx.P_re else ctx.P_re
    grid_drawn = consumed - pv_used
    fed_in = ctx.P_re - pv_used
    cost = (grid_drawn * ctx.get + pv_used * ctx.fit) * dt / KWH
    feedin = fed_in * ctx.fit * dt / KWH
    row = StepLedger(ctx.t, ctx.P_re, ctx.P_grid, committed, income, feedin, cost,
                     reimbursement, len(book.active), consumed, grid_drawn, fed_in, ctx.fit, ctx.get)
    survivors = []
    end = ctx.t + dt
    for c in book.active:
        c.remaining -= dt
        if c.remaining > 0:
            survivors.append(c)
        else:
            c.remaining = 0
            c.active = False
            c.end = end
            c.end_reason = "expired"
    book.active = survivors
    return row
