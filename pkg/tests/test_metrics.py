import json
import math

import pytest
from hypothesis import given, strategies as st

from microgrid_sla.broker import StepLedger
from microgrid_sla.metrics import availability, par, profit, reactivity


def test_par_examples():
    assert par([5.0] * 10) == 1.0
    assert par([0, 4]) == 2.0
    # 2 kW for one sample in 200: mean 10 W
    assert par([2000.0] + [0.0] * 199) == 200.0
    assert par([0.0, 0.0]) == 1.0
    with pytest.raises(ValueError):
        par([])


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=200))
def test_par_at_least_one(xs):
    if max(xs) > 0:
        assert par(xs) >= 1.0 - 1e-12


def test_availability_examples():
    assert availability([10, 20], []) == (15.0, 0.0, 1.0, 0.0)
    assert availability([5], [5])[2] == 0.5
    mtbf, mttr, a, u = availability([99], [1])
    assert (mtbf, mttr, a) == (99, 1, 0.99)
    assert u == pytest.approx(0.01)


def test_reactivity_examples():
    assert reactivity(5, 0) == 1.0
    assert reactivity(0, 5) == 0.0
    assert reactivity(3, 1) == 0.75
    assert reactivity(0, 0) == 1.0


def _row(ug, fi, cs, cr):
    return StepLedger(0, 0, 0, 0, ug, fi, cs, cr, 0, 0, 0, 0, 0, 0)


def test_profit_examples():
    assert profit([]) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert profit([_row(0, 0, 0, 0)] * 3) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert profit([_row(10, 2, 5, 1)]) == (6, 10, 2, 5, 1)
    assert profit([_row(4, 1, 2, 0), _row(6, 1, 3, 1)])[0] == 6


def test_report_json_handles_nan(tiny):
    from microgrid_sla import OptimisticPolicy, run_simulation
    rep = run_simulation(tiny.replace(sim_length=0), OptimisticPolicy()).report
    assert math.isnan(rep.par)
    doc = json.loads(rep.to_json())
    assert doc["par"] is None and doc["availability"] == 1.0 and doc["reactivity"] == 1.0
    assert "availability" in rep.pretty()
