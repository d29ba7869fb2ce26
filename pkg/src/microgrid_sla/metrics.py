"""Evaluation metrics: PAR, availability, reactivity and broker profit."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence


def par(demand: Sequence[float]) -> float:
    """Peak-to-average ratio of a non-negative demand series."""
    if len(demand) == 0:
        raise ValueError("PAR of an empty series is undefined")
    peak = max(demand)
    mean = math.fsum(demand) / len(demand)
    if mean == 0:
        if peak == 0:
            return 1.0
        raise ValueError("series with zero mean and positive peak has negative values")
    return peak / mean


def availability(up_segments: Sequence[float], down_segments: Sequence[float]):
    """``(MTBF, MTTR, A, U)`` from uptime and downtime segment lengths.

    Without any downtime the service is fully available: A = 1, MTTR = 0.
    """
    mtbf = math.fsum(up_segments) / len(up_segments) if up_segments else 0.0
    if not down_segments:
        return mtbf, 0.0, 1.0, 0.0
    mttr = math.fsum(down_segments) / len(down_segments)
    if mtbf + mttr == 0:
        return mtbf, mttr, 1.0, 0.0
    a = mtbf / (mtbf + mttr)
    return mtbf, mttr, a, 1.0 - a


def reactivity(cbp: int, cnbp: int) -> float:
    if cbp + cnbp == 0:
        return 1.0
    return cbp / (cbp + cnbp)


def profit(rows: Iterable) -> tuple[float, float, float, float, float]:
    """``(profit, income_ugrid, income_feedin, cost_supply, cost_reimb)`` from ledger rows."""
    ug, fi, cs, cr = [], [], [], []
    for r in rows:
        ug.append(r.income_ugrid)
        fi.append(r.income_feedin)
        cs.append(r.cost_supply)
        cr.append(r.cost_reimb)
    return combine(math.fsum(ug), math.fsum(fi), math.fsum(cs), math.fsum(cr))


def combine(income_ugrid: float, income_feedin: float, cost_supply: float, cost_reimb: float):
    return ((income_ugrid + income_feedin) - (cost_supply + cost_reimb),
            income_ugrid, income_feedin, cost_supply, cost_reimb)


@dataclass(frozen=True)
class MetricsReport:
    par: float
    mtbf: float
    mttr: float
    availability: float
    unavailability: float
    failure_rate: float
    reactivity: float
    cbp: int
    cnbp: int
    profit: float
    income_ugrid: float
    income_feedin: float
    cost_supply: float
    cost_reimb: float
    discomfort: float
    contracts: int
    unit_contracts: int
    interruptions: int
    completions: int
    abandonments: int

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]

    def to_json(self) -> str:
        return json.dumps({k: (None if isinstance(v, float) and math.isnan(v) else v)
                           for k, v in asdict(self).items()}, indent=2)

    def pretty(self) -> str:
        width = max(len(c) for c in self.columns())
        lines = []
        for c in self.columns():
            v = getattr(self, c)
            text = f"{v:.6g}" if isinstance(v, float) else str(v)
            lines.append(f"{c.ljust(width)}  {text}")
        return "\n".join(lines)


def build_report(result) -> MetricsReport:
    """Aggregate a finished simulation into one report (segments pooled over loads)."""
    agents = result.agents
    up = [s for a in agents for s in a.up_segments]
    down = [s for a in agents for s in a.down_segments]
    mtbf, mttr, a, u = availability(up, down)
    cbp = sum(x.cbp for x in agents)
    cnbp = sum(x.cnbp for x in agents)
    tot = result.totals
    pi, ug, fi, cs, cr = combine(tot.income_ugrid, tot.income_feedin, tot.cost_supply, tot.cost_reimb)
    log = result.book.log
    return MetricsReport(
        par=par(result.demand) if result.demand else math.nan,
        mtbf=mtbf,
        mttr=mttr,
        availability=a,
        unavailability=u,
        failure_rate=1.0 / mtbf if mtbf > 0 else 0.0,
        reactivity=reactivity(cbp, cnbp),
        cbp=cbp,
        cnbp=cnbp,
        profit=pi,
        income_ugrid=ug,
        income_feedin=fi,
        cost_supply=cs,
        cost_reimb=cr,
        discomfort=math.fsum(x.discomfort for x in agents),
        contracts=len(log),
        unit_contracts=sum(1 for c in log if c.duration == result.cfg.catalog.durations[0]),
        interruptions=sum(x.interruptions for x in agents),
        completions=sum(x.completions for x in agents),
        abandonments=sum(x.abandonments for x in agents),
    )
