"""Scenario configuration: tariffs, grid plans, SLA catalog, appliance fleet, weather.

Scenarios are TOML files. See ``data/reference.toml`` and the README for the
schema. Relative file paths inside a scenario (measured weather, event
traces) resolve against the scenario file's directory.
"""

from __future__ import annotations

import calendar
import dataclasses
import datetime as _dt
import hashlib
import math
import sys
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioError
from .loads import INFLEXIBLE, ApplianceSpec, EventTrace, OperationState, Probabilistic
from .supply import ClearSky, Measured, PvParams, WeatherSource
from .timeseries import TimeSeries, parse_timeseries

DAY = 86400
DEFAULT_DURATIONS = (1, 10, 30, 60, 120, 600, 1800)


@dataclass(frozen=True)
class Bands:
    """Piecewise-constant function of the second of day over half-open bands."""

    bands: tuple[tuple[int, int, float], ...]
    name: str = field(default="bands", compare=False)

    def __post_init__(self):
        if not self.bands:
            raise ScenarioError(self.name, "no bands given")
        expected = 0
        for start, end, value in self.bands:
            if start != expected:
                raise ScenarioError(self.name, f"band starting at {start} leaves a gap or overlap at {expected}")
            if end <= start:
                raise ScenarioError(self.name, f"empty band [{start}, {end})")
            if end > DAY:
                raise ScenarioError(self.name, f"band ends at {end}, past the end of the day ({DAY})")
            if not (value >= 0 and math.isfinite(value)):
                raise ScenarioError(self.name, f"negative or non-finite value {value}")
            expected = end
        if expected != DAY:
            raise ScenarioError(self.name, f"bands stop at {expected}, not {DAY}")
        object.__setattr__(self, "_starts", tuple(b[0] for b in self.bands))

    def at(self, second_of_day: int) -> float:
        return self.bands[bisect_right(self._starts, second_of_day % DAY) - 1][2]


TariffSchedule = Bands
GridPlan = Bands


def tariff_at(schedule: Bands, t: int) -> float:
    return schedule.at(t)


def grid_power_at(plan: Bands, t: int) -> float:
    return plan.at(t)


def _hours(*spec) -> tuple[tuple[int, int, float], ...]:
    return tuple((int(a * 3600), int(b * 3600), float(v)) for a, b, v in spec)


ITALIAN_GET = Bands(_hours((0, 6, 0.15), (6, 21, 0.29), (21, 24, 0.15)), "tariffs.get")
ITALIAN_FIT = Bands(_hours((0, 6, 0.02), (6, 21, 0.04), (21, 24, 0.02)), "tariffs.fit")

PLANS = {
    "Plan0": Bands(_hours((0, 24, 0)), "plan"),
    "Plan1": Bands(_hours((0, 24, 1500)), "plan"),
    "Plan2": Bands(_hours((0, 6, 1000), (6, 18, 3000), (18, 24, 1000)), "plan"),
    "Plan3": Bands(_hours((0, 24, 3000)), "plan"),
    "Plan4": Bands(_hours((0, 24, 6000)), "plan"),
}


@dataclass(frozen=True)
class SlaCatalog:
    durations: tuple[int, ...] = DEFAULT_DURATIONS

    def __post_init__(self):
        d = self.durations
        if not d or d[0] != 1:
            raise ScenarioError("catalog.durations", "first duration must be the unitary agreement (1)")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ScenarioError("catalog.durations", "must be strictly increasing")

    def __len__(self) -> int:
        return len(self.durations)


@dataclass(frozen=True)
class ScenarioConfig:
    get: Bands = ITALIAN_GET
    fit: Bands = ITALIAN_FIT
    plan: Bands = PLANS["Plan3"]
    catalog: SlaCatalog = SlaCatalog()
    appliances: tuple[ApplianceSpec, ...] = ()
    pv: PvParams = PvParams()
    weather: WeatherSource = ClearSky()
    start_date: _dt.date = _dt.date(2015, 1, 1)
    start_second: int = 0
    sim_length: int = DAY
    seed: int = 0
    time_dilation: int = 1
    plan_name: str | None = "Plan3"
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.sim_length < 0:
            raise ScenarioError("sim_length", "must be >= 0")
        if not 0 <= self.start_second < DAY:
            raise ScenarioError("start_second", "must be a second of the day")
        if self.time_dilation < 1:
            raise ScenarioError("time_dilation", "must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ScenarioError("seed", "must fit in 64 bits")

    @property
    def start_epoch(self) -> int:
        return calendar.timegm(self.start_date.timetuple()) + self.start_second

    def with_plan(self, name: str) -> "ScenarioConfig":
        if name not in PLANS:
            raise ScenarioError("plan", f"unknown plan {name!r}; choose from {sorted(PLANS)}")
        return dataclasses.replace(self, plan=PLANS[name], plan_name=name)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return hashlib.sha256(dumps_scenario(self).encode()).hexdigest()


# -- parsing ---------------------------------------------------------------

def _req(tree: dict, key: str, where: str):
    if key not in tree:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing")
    return tree[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    return value


def _bands(raw, where: str) -> Bands:
    if not isinstance(raw, list):
        raise ScenarioError(where, "expected a list of [start, end, value] triples")
    out = []
    for i, b in enumerate(raw):
        if not isinstance(b, list) or len(b) != 3:
            raise ScenarioError(f"{where}[{i}]", "expected [start, end, value]")
        out.append((_int(b[0], f"{where}[{i}]"), _int(b[1], f"{where}[{i}]"), _num(b[2], f"{where}[{i}]")))
    return Bands(tuple(out), where)


def _psi(raw, where: str) -> float:
    if raw == "inflexible":
        return INFLEXIBLE
    return _num(raw, where)


def _state(raw: dict, where: str) -> OperationState:
    try:
        return OperationState(
            power=_num(_req(raw, "power", where), f"{where}.power"),
            duration=_int(_req(raw, "duration", where), f"{where}.duration"),
            start_delay_max=_int(raw.get("start_delay_max", 600), f"{where}.start_delay_max"),
            interruption_severity=_num(raw.get("interruption_severity", 1.0), f"{where}.interruption_severity"),
        )
    except ScenarioError as exc:
        if exc.field.startswith(where):
            raise
        raise ScenarioError(where, str(exc)) from None


def _usage(raw: dict, where: str, base: Path | None):
    kind = raw.get("kind", "probabilistic")
    if kind == "probabilistic":
        profile = raw.get("hourly_profile")
        return Probabilistic(
            omega_star=_num(raw.get("omega_star", 1.0), f"{where}.omega_star"),
            decay=_num(raw.get("decay", 1.0), f"{where}.decay"),
            recovery_seconds=_int(raw.get("recovery_seconds", 0), f"{where}.recovery_seconds"),
            starts_per_day=_num(raw.get("starts_per_day", 1.0), f"{where}.starts_per_day"),
            hourly_profile=None if profile is None else tuple(_num(v, f"{where}.hourly_profile") for v in profile),
        )
    if kind == "trace":
        if "path" in raw:
            events = read_event_trace(_resolve(raw["path"], base))
            return EventTrace(events, raw["path"])
        return EventTrace(tuple(_int(e, f"{where}.events") for e in raw.get("events", [])))
    raise ScenarioError(f"{where}.kind", f"unknown usage kind {kind!r}")


def _appliance(raw: dict, i: int, base: Path | None) -> ApplianceSpec:
    where = f"appliances[{i}]"
    name = str(_req(raw, "name", where))
    states_raw = _req(raw, "states", where)
    if not isinstance(states_raw, list):
        raise ScenarioError(f"{where}.states", "expected a list of tables")
    states = []
    for j, s in enumerate(states_raw):
        st = _state(s, f"{where}.states[{j}]")
        repeat = _int(s.get("repeat", 1), f"{where}.states[{j}].repeat")
        if repeat < 1:
            raise ScenarioError(f"{where}.states[{j}].repeat", "must be >= 1")
        states.extend([st] * repeat)
    if not states:
        raise ScenarioError(f"{where}.states", "must be non-empty")
    return ApplianceSpec(
        name=name,
        states=tuple(states),
        psi=_psi(raw.get("psi", "inflexible"), f"{where}.psi"),
        usage=_usage(raw.get("usage", {}), f"{where}.usage", base),
    )


def _weather(raw: dict, base: Path | None) -> WeatherSource:
    kind = raw.get("kind", "clearsky")
    if kind == "clearsky":
        return ClearSky(
            day_length=_int(raw.get("day_length", 8 * 3600), "weather.day_length"),
            sunrise=_int(raw.get("sunrise", 8 * 3600), "weather.sunrise"),
            amplitude=_num(raw.get("amplitude", 1.0), "weather.amplitude"),
        )
    if kind == "measured":
        path = str(_req(raw, "path", "weather"))
        series = parse_timeseries(_resolve(path, base), _int(raw.get("resolution", 900), "weather.resolution"),
                                  header=bool(raw.get("header", False)))
        return Measured(series, path)
    if kind == "measured_inline":
        samples = raw.get("samples", [])
        series = TimeSeries(tuple(_int(s[0], "weather.samples") for s in samples),
                            tuple(_num(s[1], "weather.samples") for s in samples),
                            _int(raw.get("resolution", 900), "weather.resolution"))
        return Measured(series)
    raise ScenarioError("weather.kind", f"unknown weather kind {kind!r}")


def _resolve(path: str, base: Path | None) -> Path:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


def read_event_trace(path: str | Path) -> tuple[int, ...]:
    """Event-trace CSV: one epoch second per line."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError("usage.path", f"file not found: {path}")
    events = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            events.append(int(line.split(",")[0]))
        except ValueError:
            raise ScenarioError("usage.path", f"{path}:{lineno}: not an integer epoch second") from None
    return tuple(sorted(set(events)))


def parse_scenario(tree: dict[str, Any], base: Path | None = None, source: str | None = None) -> ScenarioConfig:
    tariffs = tree.get("tariffs", {})
    get = _bands(tariffs["get"]["bands"], "tariffs.get") if "get" in tariffs else ITALIAN_GET
    fit = _bands(tariffs["fit"]["bands"], "tariffs.fit") if "fit" in tariffs else ITALIAN_FIT

    plan_raw = tree.get("plan", {"name": "Plan3"})
    if "bands" in plan_raw:
        plan, plan_name = _bands(plan_raw["bands"], "plan.bands"), plan_raw.get("name")
    else:
        plan_name = plan_raw.get("name", "Plan3")
        if plan_name not in PLANS:
            raise ScenarioError("plan.name", f"unknown plan {plan_name!r}")
        plan = PLANS[plan_name]

    catalog_raw = tree.get("catalog", {})
    durations = tuple(_int(d, "catalog.durations") for d in catalog_raw.get("durations", DEFAULT_DURATIONS))
    catalog = SlaCatalog(durations)

    pv_raw = tree.get("pv", {})
    pv = PvParams(_num(pv_raw.get("peak_power", 3300.0), "pv.peak_power"),
                  _num(pv_raw.get("efficiency", 1.0), "pv.efficiency"))

    apps_raw = tree.get("appliances", [])
    if not isinstance(apps_raw, list):
        raise ScenarioError("appliances", "expected an array of tables")
    appliances = tuple(_appliance(a, i, base) for i, a in enumerate(apps_raw))

    start_date = tree.get("start_date", _dt.date(2015, 1, 1))
    if isinstance(start_date, str):
        try:
            start_date = _dt.date.fromisoformat(start_date)
        except ValueError:
            raise ScenarioError("start_date", f"not an ISO date: {start_date!r}") from None
    if isinstance(start_date, _dt.datetime) or not isinstance(start_date, _dt.date):
        raise ScenarioError("start_date", "expected a calendar date")

    seed = _req(tree, "seed", "")
    return ScenarioConfig(
        get=get, fit=fit, plan=plan, catalog=catalog, appliances=appliances, pv=pv,
        weather=_weather(tree.get("weather", {}), base),
        start_date=start_date,
        start_second=_int(tree.get("start_second", 0), "start_second"),
        sim_length=_int(tree.get("sim_length", DAY), "sim_length"),
        seed=_int(seed, "seed"),
        time_dilation=_int(tree.get("time_dilation", 1), "time_dilation"),
        plan_name=plan_name,
        source=source,
    )


def loads_scenario(text: str, base: Path | None = None, source: str | None = None) -> ScenarioConfig:
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(source or "scenario", f"parse error: {exc}") from None
    return parse_scenario(tree, base, source)


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError("scenario", f"file not found: {path}")
    return loads_scenario(path.read_text(encoding="utf-8"), path.parent, str(path))


def reference_path() -> Path:
    return Path(__file__).with_name("data") / "reference.toml"


def reference_scenario() -> ScenarioConfig:
    return load_scenario(reference_path())


# -- serialization ---------------------------------------------------------

def _bands_out(b: Bands) -> list:
    return [[s, e, v] for s, e, v in b.bands]


def _usage_out(u) -> dict:
    if isinstance(u, EventTrace):
        return {"kind": "trace", "events": list(u.events)}
    out = {"kind": "probabilistic", "omega_star": u.omega_star, "decay": u.decay,
           "recovery_seconds": u.recovery_seconds, "starts_per_day": u.starts_per_day}
    if u.hourly_profile is not None:
        out["hourly_profile"] = list(u.hourly_profile)
    return out


def scenario_tree(cfg: ScenarioConfig) -> dict:
    """Plain-data form of a config. Traces and measured series are inlined."""
    tree: dict[str, Any] = {
        "seed": cfg.seed,
        "start_date": cfg.start_date,
        "start_second": cfg.start_second,
        "sim_length": cfg.sim_length,
        "time_dilation": cfg.time_dilation,
        "tariffs": {"get": {"bands": _bands_out(cfg.get)}, "fit": {"bands": _bands_out(cfg.fit)}},
        "plan": {"bands": _bands_out(cfg.plan)},
        "catalog": {"durations": list(cfg.catalog.durations)},
        "pv": {"peak_power": cfg.pv.peak_power, "efficiency": cfg.pv.efficiency},
    }
    if cfg.plan_name:
        tree["plan"]["name"] = cfg.plan_name
    w = cfg.weather
    if isinstance(w, ClearSky):
        tree["weather"] = {"kind": "clearsky", "day_length": w.day_length, "sunrise": w.sunrise,
                           "amplitude": w.amplitude}
    else:
        tree["weather"] = {"kind": "measured_inline", "resolution": w.series.resolution,
                           "samples": [[t, v] for t, v in zip(w.series.times, w.series.values)]}
    tree["appliances"] = [
        {
            "name": a.name,
            "psi": "inflexible" if math.isinf(a.psi) else a.psi,
            "states": [dataclasses.asdict(s) for s in a.states],
            "usage": _usage_out(a.usage),
        }
        for a in cfg.appliances
    ]
    return tree


def dumps_scenario(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(scenario_tree(cfg))


def write_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(cfg), encoding="utf-8")

