"""Epoch-indexed timeseries ingestion (``epoch_second,value`` CSV)."""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from .errors import ScenarioError


@dataclass(frozen=True)
class TimeSeries:
    times: tuple[int, ...] = ()
    values: tuple[float, ...] = ()
    resolution: int = 1

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ScenarioError("timeseries", "times and values differ in length")
        if self.resolution < 1:
            raise ScenarioError("timeseries.resolution", "must be >= 1")
        for a, b in zip(self.times, self.times[1:]):
            if b <= a:
                raise ScenarioError("timeseries", f"timestamps not strictly increasing at {b}")
        for v in self.values:
            if not math.isfinite(v):
                raise ScenarioError("timeseries", f"non-finite value {v!r}")

    def __len__(self) -> int:
        return len(self.times)

    def hold(self, t: float, default: float = 0.0) -> float:
        """Zero-order hold: the latest sample at or before ``t``.

        Before the first sample, or past the last sample by more than one
        resolution interval, ``default`` is returned.
        """
        i = bisect_right(self.times, t) - 1
        if i < 0:
            return default
        if i == len(self.times) - 1 and t >= self.times[i] + self.resolution:
            return default
        return self.values[i]


def parse_timeseries(path: str | Path, resolution: int, header: bool = False) -> TimeSeries:
    path = Path(path)
    if not path.exists():
        raise ScenarioError("timeseries", f"file not found: {path}")
    times: list[int] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header and lineno == 1:
                continue
            if len(row) != 2:
                raise ScenarioError("timeseries", f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t = int(row[0])
                v = float(row[1])
            except ValueError as exc:
                raise ScenarioError("timeseries", f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(v):
                raise ScenarioError("timeseries", f"{path}:{lineno}: non-finite value")
            if times and t <= times[-1]:
                raise ScenarioError("timeseries", f"{path}:{lineno}: timestamp {t} not increasing")
            times.append(t)
            values.append(v)
    return TimeSeries(tuple(times), tuple(values), resolution)


def write_timeseries(path: str | Path, series: TimeSeries) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for t, v in zip(series.times, series.values):
            fh.write(f"{t},{v!r}\n")
