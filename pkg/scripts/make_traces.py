"""Regenerate the synthetic appliance start-event traces shipped with the reference scenario.

One week (2015-01-01 .. 2015-01-07, UTC) of habitual start times per appliance
with seeded jitter. Output: one CSV per appliance, one epoch second per line.
"""

import calendar
import datetime as dt
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "microgrid_sla" / "data" / "traces"

# appliance -> per-weekday-index list of habitual "HH:MM" starts (day 0 = Jan 1)
HABITS = {
    "television": [["11:50", "18:45", "20:40"], ["12:00", "19:00"], ["11:55", "18:50", "21:00"],
                   ["12:05", "20:15"], ["11:45", "18:40", "20:50"], ["10:30", "19:10"], ["12:00", "20:00"]],
    "dishwasher": [["13:40", "20:10"], ["20:30"], ["13:30"], ["20:20"], ["13:50", "20:00"], ["21:00"], ["14:00"]],
    "tumble_dryer": [["11:10"], [], ["16:20"], [], ["10:40"], ["17:30"], []],
    "washing_machine": [["09:30", "18:10"], ["10:15"], ["08:40"], ["17:45"], ["09:00"], ["16:10"], ["09:20"]],
    "coffee_machine": [["07:40", "10:30", "12:40", "15:10"], ["07:30", "13:00"], ["07:45", "12:50", "15:30"],
                       ["07:35", "13:10"], ["07:40", "12:45", "16:00"], ["08:10", "13:20"], ["08:30", "12:55", "15:40"]],
}
JITTER = 600


def main(seed: int = 2015) -> None:
    rng = random.Random(seed)
    day0 = calendar.timegm(dt.date(2015, 1, 1).timetuple())
    OUT.mkdir(parents=True, exist_ok=True)
    for name, days in HABITS.items():
        events = []
        for d, starts in enumerate(days):
            for hhmm in starts:
                h, m = map(int, hhmm.split(":"))
                events.append(day0 + d * 86400 + h * 3600 + m * 60 + rng.randint(-JITTER, JITTER))
        events.sort()
        (OUT / f"{name}.csv").write_text("".join(f"{e}\n" for e in events))


if __name__ == "__main__":
    main()
