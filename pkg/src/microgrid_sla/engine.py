"""The 1 Hz trading cycle.

Each step runs, in this fixed order: supply update, enforcement and
reimbursement, usage sampling, pricing, bidding, allocation, settlement and
load progression. Randomness comes from streams derived from the run seed:
one per appliance for usage sampling (drawn every step whatever the
appliance is doing, so start draws line up across policies) and one for
allocation order.
"""

from __future__ import annotations

import csv
import datetime as _dt
import random
from dataclasses import dataclass, field
from pathlib import Path

from .broker import (LEDGER_COLUMNS, SlaBook, StepLedger, SupplyContext, allocate, enforce,
                     settle_step)
from .loads import IDLE, LoadAgent, close_segments, request_start, sample_start, select_duration, step_load
from .scenario import ScenarioConfig
from .supply import supply_at

CSV_LEDGER_COLUMNS = ("t", "P_re", "P_grid", "committed", "income_ugrid", "income_feedin",
                      "cost_supply", "cost_reimb", "n_contracts", "consumed", "grid_drawn", "fed_in")
EVENT_COLUMNS = ("t", "load", "event", "state", "weight")
CONTRACT_COLUMNS = ("id", "load", "power", "duration", "unit_price", "start", "end", "end_reason", "refund")


@dataclass
class Totals:
    income_ugrid: float = 0.0
    income_feedin: float = 0.0
    cost_supply: float = 0.0
    cost_reimb: float = 0.0

    @property
    def profit(self) -> float:
        return (self.income_ugrid + self.income_feedin) - (self.cost_supply + self.cost_reimb)


@dataclass
class SimResult:
    cfg: ScenarioConfig
    policy_name: str
    seed: int
    totals: Totals
    agents: list
    book: SlaBook
    demand: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    events: list = field(default_factory=list)
    steps: int = 0
    report: object = None


class Simulation:
    """Mutable simulation state; ``step()`` advances one trading cycle."""

    def __init__(self, cfg: ScenarioConfig, policy, seed: int | None = None, record: bool = True):
        self.cfg = cfg
        self.policy = policy
        self.seed = cfg.seed if seed is None else seed
        self.rng = random.Random(f"{self.seed}:allocation")
        self.record = record
        self.dt = cfg.time_dilation
        self.t0 = cfg.start_epoch
        self.t = self.t0
        self.t_end = self.t0 + cfg.sim_length
        self.durations = cfg.catalog.durations
        self.agents = [LoadAgent(i, spec) for i, spec in enumerate(cfg.appliances)]
        self.usage_rngs = [random.Random(f"{self.seed}:usage:{i}") for i in range(len(self.agents))]
        self.book = SlaBook()
        self.totals = Totals()
        self.demand: list[float] = []
        self.ledger: list[StepLedger] = []
        self.events: list[tuple] = []
        self.steps = 0
        self._doy_cache: dict[int, int] = {}

    def day_of_year(self, t: int) -> int:
        day = t // 86400
        doy = self._doy_cache.get(day)
        if doy is None:
            doy = _dt.datetime.fromtimestamp(day * 86400, _dt.timezone.utc).timetuple().tm_yday
            self._doy_cache[day] = doy
        return doy

    def context(self, t: int) -> SupplyContext:
        cfg = self.cfg
        sod = t % 86400
        return SupplyContext(
            P_re=supply_at(cfg.weather, cfg.pv, t),
            P_grid=cfg.plan.at(sod),
            fit=cfg.fit.at(sod),
            get=cfg.get.at(sod),
            second_of_day=sod,
            day_of_year=self.day_of_year(t),
            t=t,
        )

    @property
    def done(self) -> bool:
        return self.t >= self.t_end

    def step(self) -> StepLedger:
        t, dt = self.t, self.dt
        book, agents, rng = self.book, self.agents, self.rng
        record = self.record
        ctx = self.context(t)

        reimb, _terminated = enforce(book, ctx)

        for a, urng in zip(agents, self.usage_rngs):
            u = urng.random()
            if a.phase == IDLE and sample_start(a, t, u, dt):
                request_start(a, t)
                if record:
                    self.events.append((t, a.id, "request", 0, 0.0))

        bidders = [a for a in agents if a.phase != IDLE and not a.covered()]
        if bidders:
            prices = self.policy.prices(ctx, book, self.durations)
            bids = []
            for a in bidders:
                state = a.spec.states[a.state_index]
                k = select_duration(a.remaining, prices, self.durations, a.spec.psi)
                if k is None:
                    a.cnbp += 1
                    continue
                q = [0.0] * len(self.durations)
                q[k] = float(state.power)
                bids.append((a.id, q))
            granted, rejected = allocate(book, bids, prices, self.durations, ctx, rng)
            for c in granted:
                a = agents[c.load_id]
                a.contracts.append(c)
                a.cbp += 1
            for lid in rejected:
                agents[lid].cnbp += 1

        consumed = 0.0
        flags = []
        for a in agents:
            if a.phase == IDLE:
                flags.append(False)
                continue
            ok = a.covered()
            flags.append(ok)
            if ok:
                consumed += a.spec.states[a.state_index].power

        row = settle_step(book, ctx, consumed, reimb, dt)
        tot = self.totals
        tot.income_ugrid += row.income_ugrid
        tot.income_feedin += row.income_feedin
        tot.cost_supply += row.cost_supply
        tot.cost_reimb += row.cost_reimb
        self.demand.append(consumed)
        if record:
            self.ledger.append(row)

        for a, ok in zip(agents, flags):
            if a.phase != IDLE:
                ev = step_load(a, ok, t, dt)
                if ev and record:
                    self.events.extend(ev)

        self.t = t + dt
        self.steps += 1
        return row

    def finish(self) -> SimResult:
        for a in self.agents:
            close_segments(a)
        return SimResult(self.cfg, getattr(self.policy, "name", "custom"), self.seed, self.totals,
                         self.agents, self.book, self.demand, self.ledger, self.events, self.steps)


def run_simulation(cfg: ScenarioConfig, policy, seed: int | None = None, record: bool = True,
                   with_report: bool = True) -> SimResult:
    sim = Simulation(cfg, policy, seed, record)
    while sim.t < sim.t_end:
        sim.step()
    result = sim.finish()
    if with_report:
        from .metrics import build_report
        result.report = build_report(result)
    return result


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_ledger_csv(path, ledger) -> None:
    idx = [LEDGER_COLUMNS.index(c) for c in CSV_LEDGER_COLUMNS]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_LEDGER_COLUMNS) + "\n")
        for row in ledger:
            fh.write(",".join(_fmt(row[i]) for i in idx) + "\n")


def write_events_csv(path, events) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow([_fmt(v) for v in ev])


def write_contracts_csv(path, book: SlaBook) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONTRACT_COLUMNS)
        for c in book.log:
            w.writerow([c.id, c.load_id, _fmt(c.power), c.duration, _fmt(c.unit_price), c.start,
                        "" if c.end is None else c.end, c.end_reason or "active", _fmt(c.refund)])
