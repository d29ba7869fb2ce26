"""Acceptance criteria, one test each.

Every test prints (and records for the terminal summary) a single
``criterion N: PASS|FAIL`` line with the measured quantities.
"""

import dataclasses
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from microgrid_sla import OptimisticPolicy, PessimisticPolicy, base_price, run_simulation
from microgrid_sla.broker import KWH
from microgrid_sla.engine import write_ledger_csv
from microgrid_sla.evolve import EvolutionParams, evolve
from microgrid_sla.loads import Probabilistic
from microgrid_sla.metrics import availability, par, reactivity
from microgrid_sla.neuro import (FullyConnected, Genome, Layered, NeuralPolicy, decode_prices, forward,
                                 random_genome, save_genome)
from microgrid_sla.scenario import reference_scenario

from conftest import ACCEPTANCE_LINES


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def oracle_price(ps: float, pre: float, fit: float, get: float) -> Fraction:
    """Exact rational unit cost: PV share at fit, grid share at get."""
    ps, pre, fit, get = map(Fraction, (ps, pre, fit, get))
    if ps == 0:
        return fit
    from_pv = min(ps, pre)
    from_grid = max(ps - pre, Fraction(0))
    return (from_pv * fit + from_grid * get) / ps


def test_criterion_1_price_oracle():
    rng = random.Random(20150101)
    tuples = [(rng.uniform(0, 1e4), rng.uniform(0, 1e4), rng.uniform(0, 1), rng.uniform(0, 1))
              for _ in range(1000)]
    # a few exact edge cases on the branch boundary
    tuples[:4] = [(0.0, 0.0, 0.3, 0.7), (5000.0, 5000.0, 0.1, 0.9), (1e4, 0.0, 0.2, 0.4), (0.0, 1e4, 0.05, 0.5)]
    t0 = time.perf_counter()
    got = [base_price(*t) for t in tuples]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for t, g in zip(tuples, got):
        exact = oracle_price(*t)
        err = abs(Fraction(g) - exact)
        rel = float(err / abs(exact)) if exact != 0 else float(err)
        worst = max(worst, rel)
    ok = worst <= 1e-12 and elapsed < 1.0
    report(1, ok, f"max rel err {worst:.3g} over 1000 tuples, {elapsed * 1e3:.2f} ms")
    assert ok


def test_criterion_2_price_point():
    p = base_price(4000, 1000, 0.05, 0.5)
    ok = p == 0.3875
    report(2, ok, f"base_price(4000, 1000, 0.05, 0.5) = {p!r}")
    assert ok


def _neural_policy():
    return NeuralPolicy(random_genome(Layered(), np.random.default_rng(42)))


@pytest.mark.parametrize("policy_name", ["optimistic", "pessimistic", "neural"])
def test_criterion_3_conservation(policy_name):
    cfg = reference_scenario()
    policy = {"optimistic": OptimisticPolicy(), "pessimistic": PessimisticPolicy(),
              "neural": _neural_policy()}[policy_name]
    t0 = time.perf_counter()
    res = run_simulation(cfg, policy)
    elapsed = time.perf_counter() - t0
    over = 0
    drift = 0.0
    for row in res.ledger:
        if row.committed > row.P_re + row.P_grid:
            over += 1
        drift = max(drift, abs(row.consumed + row.fed_in - (row.P_re + row.grid_drawn)))
    ok = len(res.ledger) == 86400 and over == 0 and drift <= 1e-9 and elapsed < 10
    report(3, ok, f"{policy_name}: {len(res.ledger)} steps, {over} infeasible, "
                  f"balance drift {drift:.3g} W, {elapsed:.2f} s")
    assert ok


def _recomputed_profit(res) -> float:
    """Profit rebuilt from the contract log and the ledger's physical columns."""
    dt = res.cfg.time_dilation
    t_end = res.cfg.start_epoch + res.steps * dt
    income = math.fsum(c.power * c.unit_price * ((c.end if c.end is not None else t_end) - c.start) / KWH
                       for c in res.book.log)
    refunds = math.fsum(c.refund for c in res.book.log)
    feed_in = math.fsum(r.fed_in * r.fit * dt / KWH for r in res.ledger)
    supply = math.fsum(r.consumed * base_price(r.consumed, r.P_re, r.fit, r.get) * dt / KWH
                       for r in res.ledger if r.consumed > 0)
    return (income + feed_in) - (supply + refunds)


def _stress(cfg):
    apps = tuple(dataclasses.replace(a, usage=Probabilistic(starts_per_day=24)) for a in cfg.appliances)
    return cfg.with_plan("Plan2").replace(appliances=apps)


def test_criterion_4_accounting_identity():
    ref = reference_scenario()
    cases = [(ref, OptimisticPolicy(), ref.seed + i) for i in range(5)]
    cases += [(_stress(ref), p, i) for i, p in enumerate([OptimisticPolicy(), PessimisticPolicy()] * 3)][:5]
    worst = 0.0
    refunds = 0
    for cfg, pol, seed in cases:
        res = run_simulation(cfg, pol, seed=seed, with_report=False)
        worst = max(worst, abs(res.totals.profit - _recomputed_profit(res)))
        refunds += sum(1 for c in res.book.log if c.refund > 0)
    ok = worst <= 1e-9 and len(cases) == 10
    report(4, ok, f"10 seeds, max |profit - recomputed| = {worst:.3g} EUR, {refunds} refunded contracts")
    assert ok


def test_criterion_5_qualitative():
    cfg = reference_scenario().with_plan("Plan2")
    opt = run_simulation(cfg, OptimisticPolicy())
    pes = run_simulation(cfg, PessimisticPolicy())
    unit = pes.report.unit_contracts / pes.report.contracts
    p0 = [run_simulation(cfg.with_plan("Plan0"), pol).report.par for pol in (OptimisticPolicy(), PessimisticPolicy())]
    a = unit >= 0.70
    b = opt.report.reactivity < pes.report.reactivity
    c = opt.report.availability >= pes.report.availability
    d = all(50 <= v <= 500 for v in p0)
    ok = a and b and c and d
    report(5, ok, f"(a) unit share {unit:.3f} | (b) R {opt.report.reactivity:.4f} < {pes.report.reactivity:.4f}"
                  f" | (c) A {opt.report.availability:.4f} >= {pes.report.availability:.4f}"
                  f" | (d) Plan0 PAR {p0[0]:.1f}, {p0[1]:.1f}")
    assert ok


def test_criterion_6_training():
    cfg = reference_scenario().with_plan("Plan2").replace(time_dilation=10)
    t0 = time.perf_counter()
    parts = []
    ok = True
    for seed in (1, 2, 3):
        r = evolve(EvolutionParams(population_size=20, generations=20, seed=seed), cfg)
        best = [h.best for h in r.history]
        mono = len(best) == 20 and all(x <= y for x, y in zip(best, best[1:]))
        reimb = r.record.cost_reimb <= r.initial_best.cost_reimb
        ok = ok and mono and reimb
        parts.append(f"seed {seed}: best {best[0]:.3f}->{best[-1]:.3f} monotone={mono} "
                     f"reimb {r.record.cost_reimb:.3g}<={r.initial_best.cost_reimb:.3g}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 600
    report(6, ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok


def test_criterion_7_neural_bounds():
    rng = np.random.default_rng(7)
    bad = 0
    n = 10000
    for i in range(n):
        topo = Layered() if i % 2 == 0 else FullyConnected()
        g = Genome(topo, rng.normal(0.0, 3.0, topo.n_genes))
        x = rng.uniform(-2.0, 2.0, 6)
        out = forward(g, x)
        p_scale = float(rng.uniform(0.01, 20.0))
        prices = decode_prices(out, p_scale)
        if not (np.all(out >= -1) and np.all(out <= 1) and all(0 <= p <= p_scale for p in prices)):
            bad += 1
    ok = bad == 0
    report(7, ok, f"{n} genomes (layered and fully connected), {bad} out of bounds")
    assert ok


PAR_CASES = [([3.0, 3.0, 3.0], 1.0), ([0.0, 4.0], 2.0), ([1.0, 2.0, 3.0, 2.0], 1.5),
             ([0.0, 0.0, 0.0, 8.0], 4.0), ([5.0, 0.0, 5.0, 10.0], 2.0)]
AVAIL_CASES = [(([10.0, 20.0], []), (15.0, 0.0, 1.0)), (([5.0], [5.0]), (5.0, 5.0, 0.5)),
               (([99.0], [1.0]), (99.0, 1.0, 0.99)), (([30.0, 10.0], [10.0, 30.0]), (20.0, 20.0, 0.5)),
               (([6.0, 6.0, 6.0], [2.0]), (6.0, 2.0, 0.75))]
REACT_CASES = [((5, 0), 1.0), ((0, 5), 0.0), ((3, 1), 0.75), ((1, 1), 0.5), ((0, 0), 1.0)]


def test_criterion_8_metrics():
    par_ok = all(par(xs) == want for xs, want in PAR_CASES)
    av_ok = all(availability(*segs)[:3] == want for segs, want in AVAIL_CASES)
    re_ok = all(reactivity(*c) == want for c, want in REACT_CASES)
    # 2 kW peak, 10 W mean: one 2000 W second in 200
    p200 = par([2000.0] + [0.0] * 199)
    ok = par_ok and av_ok and re_ok and p200 == 200.0
    report(8, ok, f"PAR {par_ok}, availability {av_ok}, reactivity {re_ok}, PAR(2000 W, 10 W) = {p200!r}")
    assert ok


def test_criterion_9_determinism(tmp_path):
    cfg = reference_scenario()
    digests = []
    for name in ("a", "b"):
        res = run_simulation(cfg, PessimisticPolicy(), with_report=False)
        write_ledger_csv(tmp_path / f"{name}.csv", res.ledger)
    same_ledger = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    train_cfg = cfg.with_plan("Plan2").replace(time_dilation=10)
    for name in ("a", "b"):
        r = evolve(EvolutionParams(population_size=6, generations=3, seed=11), train_cfg)
        save_genome(tmp_path / f"{name}.json", r.champion)
        digests.append((tmp_path / f"{name}.json").read_bytes())
    same_ckpt = digests[0] == digests[1]
    ok = same_ledger and same_ckpt
    report(9, ok, f"ledger CSVs identical: {same_ledger}; checkpoints identical: {same_ckpt}")
    assert ok
