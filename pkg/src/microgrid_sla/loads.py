"""Appliances as reactive agents: usage sampling, best-fit SLA bidding, state progression."""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import ScenarioError

INFLEXIBLE = math.inf

IDLE = 0
WAITING = 1
RUNNING = 2
INTERRUPTED = 3

PHASE_NAMES = {IDLE: "idle", WAITING: "waiting", RUNNING: "running", INTERRUPTED: "interrupted"}


@dataclass(frozen=True)
class OperationState:
    power: float
    duration: int
    start_delay_max: int = 600
    interruption_severity: float = 1.0

    def __post_init__(self):
        if self.power < 0:
            raise ScenarioError("state.power", f"negative power {self.power}")
        if self.duration < 1:
            raise ScenarioError("state.duration", f"must be >= 1, got {self.duration}")
        if self.start_delay_max < 0:
            raise ScenarioError("state.start_delay_max", "must be >= 0")
        if self.interruption_severity < 0:
            raise ScenarioError("state.interruption_severity", "must be >= 0")


@dataclass(frozen=True)
class Probabilistic:
    """Time-of-use start model.

    The per-second start probability is ``willingness * starts_per_day / 86400``,
    optionally shaped by 24 hourly weights (normalized to mean 1).
    """

    omega_star: float = 1.0
    decay: float = 1.0
    recovery_seconds: int = 0
    starts_per_day: float = 1.0
    hourly_profile: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.omega_star <= 1:
            raise ScenarioError("usage.omega_star", f"must be in [0, 1], got {self.omega_star}")
        if not 0 <= self.decay <= 1:
            raise ScenarioError("usage.decay", f"must be in [0, 1], got {self.decay}")
        if self.recovery_seconds < 0:
            raise ScenarioError("usage.recovery_seconds", "must be >= 0")
        if self.starts_per_day < 0:
            raise ScenarioError("usage.starts_per_day", "must be >= 0")
        if self.hourly_profile is not None:
            if len(self.hourly_profile) != 24 or min(self.hourly_profile) < 0:
                raise ScenarioError("usage.hourly_profile", "needs 24 non-negative weights")
            if sum(self.hourly_profile) <= 0:
                raise ScenarioError("usage.hourly_profile", "weights sum to zero")

    def rate_table(self) -> tuple[float, ...]:
        base = self.starts_per_day / 86400.0
        if self.hourly_profile is None:
            return (base,) * 24
        mean = sum(self.hourly_profile) / 24.0
        return tuple(base * w / mean for w in self.hourly_profile)


@dataclass(frozen=True)
class EventTrace:
    events: tuple[int, ...] = ()
    path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.events, self.events[1:])):
            raise ScenarioError("usage.events", "event times must be strictly increasing")


UsageModel = Union[Probabilistic, EventTrace]


@dataclass(frozen=True)
class ApplianceSpec:
    name: str
    states: tuple[OperationState, ...]
    psi: float = INFLEXIBLE
    usage: UsageModel = field(default_factory=Probabilistic)

    def __post_init__(self):
        if not self.states:
            raise ScenarioError(f"appliances.{self.name}.states", "must be non-empty")
        if not self.psi >= 0:
            raise ScenarioError(f"appliances.{self.name}.psi", f"must be >= 0, got {self.psi}")

    @property
    def energy_wh(self) -> float:
        return sum(s.power * s.duration for s in self.states) / 3600.0


def select_duration(remaining: float, prices: Sequence[float], durations: Sequence[int], psi: float) -> int | None:
    """Index of the best-fit affordable SLA, or None when nothing is affordable.

    Best fit is the shortest duration covering ``remaining``. When no
    affordable duration is long enough, the longest affordable one is taken
    and the load re-purchases when it runs out.
    """
    longest = None
    start = bisect_left(durations, remaining)
    for k in range(start, len(durations)):
        if prices[k] <= psi:
            return k
    for k in range(min(start, len(durations)) - 1, -1, -1):
        if prices[k] <= psi:
            longest = k
            break
    return longest


def select_sla(state: OperationState, prices: Sequence[float], psi: float,
               durations: Sequence[int], remaining: float | None = None) -> list[float]:
    """Quantity vector for one state: the state's power on the best-fit duration."""
    if remaining is None:
        remaining = state.duration
    q = [0.0] * len(durations)
    if state.power <= 0:
        return q
    k = select_duration(remaining, prices, durations, psi)
    if k is not None:
        q[k] = float(state.power)
    return q


class LoadAgent:
    """Mutable runtime state of one appliance."""

    __slots__ = (
        "id", "spec", "phase", "state_index", "elapsed", "since", "started",
        "contracts", "cbp", "cnbp", "discomfort", "up_segments", "down_segments",
        "up_run", "down_run", "_w_after", "_w_time", "_trace_pos", "_rates",
        "completions", "abandonments", "interruptions",
    )

    def __init__(self, agent_id: int, spec: ApplianceSpec):
        self.id = agent_id
        self.spec = spec
        self.phase = IDLE
        self.state_index = 0
        self.elapsed = 0
        self.since = 0
        self.started = False
        self.contracts: list = []
        self.cbp = 0
        self.cnbp = 0
        self.discomfort = 0.0
        self.up_segments: list[int] = []
        self.down_segments: list[int] = []
        self.up_run = 0
        self.down_run = 0
        self.completions = 0
        self.abandonments = 0
        self.interruptions = 0
        self._w_after = None
        self._w_time = 0
        self._trace_pos = 0
        usage = spec.usage
        self._rates = usage.rate_table() if isinstance(usage, Probabilistic) else None

    @property
    def wants_power(self) -> bool:
        return self.phase != IDLE

    @property
    def current_state(self) -> OperationState:
        return self.spec.states[self.state_index]

    @property
    def remaining(self) -> int:
        return self.spec.states[self.state_index].duration - self.elapsed

    def willingness(self, t: float) -> float:
        usage = self.spec.usage
        if not isinstance(usage, Probabilistic):
            return 1.0
        if self._w_after is None:
            return usage.omega_star
        if usage.recovery_seconds <= 0:
            return usage.omega_star if t > self._w_time else self._w_after
        frac = min(1.0, (t - self._w_time) / usage.recovery_seconds)
        return self._w_after + (usage.omega_star - self._w_after) * frac

    def covered(self) -> bool:
        """True if a held, active contract supplies the current state's power."""
        need = self.spec.states[self.state_index].power
        if need <= 0:
            return True
        live = [c for c in self.contracts if c.active]
        if len(live) != len(self.contracts):
            self.contracts = live
        for c in live:
            if c.power >= need:
                return True
        return False


def sample_start(agent: LoadAgent, t: int, rng, dt: int = 1) -> bool:
    """Decide whether an idle agent requests to start during ``[t, t + dt)``.

    ``rng`` is a random stream or an already drawn uniform variate.
    """
    usage = agent.spec.usage
    if isinstance(usage, EventTrace):
        ev = usage.events
        i = agent._trace_pos
        if i >= len(ev) or ev[i] >= t + dt:
            return False
        while i < len(ev) and ev[i] < t:
            i += 1
        hit = i < len(ev) and ev[i] < t + dt
        while i < len(ev) and ev[i] < t + dt:
            i += 1
        agent._trace_pos = i
        return hit
    u = rng if isinstance(rng, float) else rng.random()
    return u < agent.willingness(t) * agent._rates[(t % 86400) // 3600] * dt


def request_start(agent: LoadAgent, t: int) -> None:
    agent.phase = WAITING
    agent.state_index = 0
    agent.elapsed = 0
    agent.since = t
    agent.started = False


def step_load(agent: LoadAgent, covered: bool, t: int, dt: int = 1) -> list[tuple]:
    """Advance one agent by one trading cycle given whether it holds supply.

    Losing supply part-way through a state is a failure (the state becomes
    interrupted). Lacking supply at a state boundary is a start delay. Either
    wait is abandoned once it exceeds the state's ``start_delay_max``.
    Returns the emitted events as ``(t, load_id, kind, state_index, weight)``.
    """
    phase = agent.phase
    if phase == IDLE:
        return []
    events = []
    aid = agent.id
    if covered:
        if phase == WAITING:
            events.append((t, aid, "start", agent.state_index, 0.0))
            agent.started = True
        elif phase == INTERRUPTED:
            events.append((t, aid, "resume", agent.state_index, 0.0))
            agent.down_segments.append(agent.down_run)
            agent.down_run = 0
        agent.phase = RUNNING
        agent.up_run += dt
        agent.elapsed += dt
        states = agent.spec.states
        if agent.elapsed >= states[agent.state_index].duration:
            agent.elapsed = 0
            agent.state_index += 1
            if agent.state_index >= len(states):
                end = t + dt
                events.append((end, aid, "complete", agent.state_index - 1, 0.0))
                _finish(agent, end, completed=True)
        return events

    if phase == RUNNING:
        if agent.elapsed > 0:
            state = agent.spec.states[agent.state_index]
            agent.up_segments.append(agent.up_run)
            agent.up_run = 0
            agent.phase = phase = INTERRUPTED
            agent.interruptions += 1
            agent.discomfort += state.interruption_severity
            events.append((t, aid, "interrupt", agent.state_index, state.interruption_severity))
        else:
            agent.phase = phase = WAITING
        agent.since = t
    if phase == INTERRUPTED:
        agent.down_run += dt
    if t + dt - agent.since > agent.spec.states[agent.state_index].start_delay_max:
        end = t + dt
        events.append((end, aid, "abandon", agent.state_index, 0.0))
        _finish(agent, end, completed=False)
    return events


def _finish(agent: LoadAgent, t: int, completed: bool) -> None:
    close_segments(agent)
    agent.phase = IDLE
    agent.state_index = 0
    agent.elapsed = 0
    agent.started = False
    if completed:
        agent.completions += 1
        usage = agent.spec.usage
        if isinstance(usage, Probabilistic):
            agent._w_after = agent.willingness(t) * usage.decay
            agent._w_time = t
    else:
        agent.abandonments += 1


def close_segments(agent: LoadAgent) -> None:
    """Flush the open uptime/downtime accumulators into the segment lists."""
    if agent.up_run > 0:
        agent.up_segments.append(agent.up_run)
        agent.up_run = 0
    if agent.down_run > 0:
        agent.down_segments.append(agent.down_run)
        agent.down_run = 0
