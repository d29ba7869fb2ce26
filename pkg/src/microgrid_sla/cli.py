"""Command-line entry point: ``microgrid-sla {simulate,train,evaluate,report}``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
Every command writes deterministic files (no timestamps), so rerunning with
the same inputs and ``--out`` rewrites identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from statistics import median

from . import __version__
from .broker import OptimisticPolicy, PessimisticPolicy
from .engine import run_simulation, write_contracts_csv, write_events_csv, write_ledger_csv
from .errors import MicrogridError
from .evolve import EvolutionParams, evolve
from .metrics import MetricsReport
from .neuro import load_policy, save_genome
from .scenario import ScenarioConfig, load_scenario, reference_scenario

OUT_ENV = "MICROGRID_SLA_OUT"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

METRICS_FILE = "metrics.csv"
RUN_COLUMNS = ("run", "policy", "plan", "seed")
TRAIN_LOG_COLUMNS = ("generation", "best", "median", "worst", "best_reimbursement")

log = logging.getLogger("microgrid_sla")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _scenario(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario) if args.scenario else reference_scenario()
    if args.plan:
        cfg = cfg.with_plan(args.plan)
    if args.dilation is not None:
        cfg = cfg.replace(time_dilation=args.dilation)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _policy(spec: str, cfg: ScenarioConfig):
    if spec == "optimistic":
        return OptimisticPolicy()
    if spec == "pessimistic":
        return PessimisticPolicy()
    if spec.startswith("neural:") and len(spec) > len("neural:"):
        return load_policy(spec[len("neural:"):], n_outputs=len(cfg.catalog))
    raise UsageError(f"unknown policy {spec!r}; use optimistic, pessimistic or neural:CHECKPOINT")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg: ScenarioConfig, command: str, **extra) -> dict:
    doc = {
        "command": command,
        "version": __version__,
        "scenario": cfg.source or "reference",
        "scenario_sha256": cfg.digest(),
        "plan": cfg.plan_name,
        "time_dilation": cfg.time_dilation,
    }
    doc.update(extra)
    return doc


def _write_metrics(path: Path, rows: list[tuple[tuple, MetricsReport]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS + MetricsReport.columns())
        for head, rep in rows:
            w.writerow([_fmt(v) for v in head] + [_fmt(v) for v in rep.row()])


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    policy = _policy(args.policy, cfg)
    out = _out_dir(args)
    result = run_simulation(cfg, policy, record=True)
    rep = result.report
    write_ledger_csv(out / "ledger.csv", result.ledger)
    write_events_csv(out / "events.csv", result.events)
    write_contracts_csv(out / "contracts.csv", result.book)
    _write_metrics(out / METRICS_FILE, [((0, policy.name, cfg.plan_name or "custom", cfg.seed), rep)])
    (out / "report.txt").write_text(rep.pretty() + "\n", encoding="utf-8")
    (out / "report.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    _write_json(out / "manifest.json", _manifest(cfg, "simulate", policy=args.policy, seed=cfg.seed,
                                                 steps=result.steps))
    if args.json:
        print(rep.to_json())
    else:
        print(rep.pretty())
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _scenario(args)
    if args.generations < 0 or args.population < 2:
        raise UsageError("--generations must be >= 0 and --population >= 2")
    seed = cfg.seed
    params = EvolutionParams(population_size=args.population, generations=args.generations,
                             seed=seed, p_scale=args.p_scale)
    out = _out_dir(args)

    def progress(stats):
        log.info("generation %d: best %.6g median %.6g", stats.generation, stats.best, stats.median)

    result = evolve(params, cfg, workers=args.workers, on_generation=progress)
    with (out / "train_log.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAIN_LOG_COLUMNS)
        for h in result.history:
            w.writerow([h.generation, _fmt(h.best), _fmt(h.median), _fmt(h.worst), _fmt(h.best_reimbursement)])
    meta = {"seed": seed, "generations": args.generations, "population": args.population,
            "scenario_sha256": cfg.digest()}
    save_genome(out / "champion.json", result.champion, params.p_scale, extra=meta)
    _write_json(out / "manifest.json", _manifest(
        cfg, "train", seed=seed, generations=args.generations, population=args.population,
        champion_fitness=result.record.fitness, champion_profit=result.record.profit,
        champion_reimbursement=result.record.cost_reimb))
    print(f"champion fitness {result.record.fitness:.6g} (profit {result.record.profit:.6g} EUR), "
          f"written to {out / 'champion.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    cfg = _scenario(args)
    policy = _policy(args.policy, cfg)
    out = _out_dir(args)
    rows = []
    seeds = []
    for i in range(args.runs):
        seed = cfg.seed + i
        rep = run_simulation(cfg, policy, seed=seed, record=False).report
        rows.append(((i, policy.name, cfg.plan_name or "custom", seed), rep))
        seeds.append(seed)
        log.info("run %d seed %d profit %.6g", i, seed, rep.profit)
    _write_metrics(out / METRICS_FILE, rows)
    _write_json(out / "manifest.json", _manifest(cfg, "evaluate", policy=args.policy, runs=args.runs, seeds=seeds))
    print(f"{args.runs} runs written to {out / METRICS_FILE}")
    return EXIT_OK


# -- report ----------------------------------------------------------------

def _read_runs(root: Path) -> list[dict]:
    files = sorted(root.rglob(METRICS_FILE))
    rows = []
    for path in files:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(RUN_COLUMNS + MetricsReport.columns()) - set(reader.fieldnames or ())
            if missing:
                raise MicrogridError(f"{path}: not a metrics file, missing columns {sorted(missing)}")
            for r in reader:
                r["_source"] = str(path.relative_to(root))
                rows.append(r)
    return rows


def summarize(rows: list[dict]) -> list[list]:
    """Per (policy, plan, metric): count of finite values, min, median, max."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["policy"], r["plan"]), []).append(r)
    table = []
    for (policy, plan), grp in sorted(groups.items()):
        for m in MetricsReport.columns():
            vals = [float(r[m]) for r in grp]
            vals = [v for v in vals if not math.isnan(v)]
            if vals:
                table.append([policy, plan, m, len(vals), min(vals), median(vals), max(vals)])
            else:
                table.append([policy, plan, m, 0, math.nan, math.nan, math.nan])
    return table


# one long-format CSV per figure axis: x = policy/plan group, y = metric value
PLOT_METRICS = ("par", "availability", "reactivity", "profit", "mtbf", "mttr", "discomfort")


def cmd_report(args) -> int:
    root = Path(args.in_dir)
    if not root.is_dir():
        raise MicrogridError(f"input directory not found: {root}")
    rows = _read_runs(root)
    if not rows:
        raise MicrogridError(f"no run data ({METRICS_FILE}) under {root}")
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    table = summarize(rows)
    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("policy", "plan", "metric", "n", "min", "median", "max"))
        for r in table:
            w.writerow([_fmt(v) for v in r])
    for m in PLOT_METRICS:
        with (out / f"plot_{m}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("policy", "plan", "seed", m))
            for r in rows:
                w.writerow((r["policy"], r["plan"], r["seed"], r[m]))
    lines = [f"{len(rows)} runs from {root}"]
    for policy, plan, m, n, lo, mid, hi in table:
        lines.append(f"{policy:<12} {plan:<8} {m:<16} n={n:<4} min={lo:.6g} median={mid:.6g} max={hi:.6g}")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", help="scenario TOML (default: bundled reference)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV} or ./out)")
    common.add_argument("--plan", help="override the grid plan, e.g. Plan2")
    common.add_argument("--dilation", type=int, help="seconds per trading cycle")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="microgrid-sla", description="Microgrid SLA market simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="run one simulation")
    s.add_argument("--policy", default="optimistic", help="optimistic | pessimistic | neural:CHECKPOINT")
    s.add_argument("--json", action="store_true", help="print the report as JSON")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", parents=[common], help="evolve a neural broker")
    t.add_argument("--generations", type=int, default=500)
    t.add_argument("--population", type=int, default=50)
    t.add_argument("--workers", type=int, default=1, help="processes for fitness evaluation")
    t.add_argument("--p-scale", type=float, default=1.0, help="price for a saturated network output")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="seeded batch of runs")
    e.add_argument("--policy", default="optimistic")
    e.add_argument("--runs", type=int, default=100)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="aggregate run outputs")
    r.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    r.add_argument("--out", metavar="DIR", help="where to write summaries (default: --in)")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"microgrid-sla: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MicrogridError, OSError, ValueError) as exc:
        print(f"microgrid-sla: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
