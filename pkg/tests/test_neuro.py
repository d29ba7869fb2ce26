import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microgrid_sla.broker import SlaBook, SupplyContext
from microgrid_sla.errors import TopologyError
from microgrid_sla.neuro import (FullyConnected, Genome, InputScales, Layered, NeuralPolicy, activate,
                                 decode_prices, dumps_genome, encode_input, forward, load_policy, loads_genome,
                                 random_genome, save_genome, zero_genome)


def test_activate():
    assert activate(0.3) == 0.3
    assert activate(-1.0) == -1.0
    assert activate(5.0) == 1.0
    assert activate(0) == 0
    assert activate(-7) == -1.0


def test_encode_noon_midsummer():
    x = encode_input(SupplyContext(1000, 3000, 0.04, 0.29, second_of_day=43200, day_of_year=182))
    assert x[4] == pytest.approx(1.0, abs=1e-9)
    assert x[5] == pytest.approx(math.sin(math.pi * 182 / 365))
    assert x[5] == pytest.approx(0.99996, abs=1e-4)
    assert x[0] == pytest.approx(1000 / 6000)


def test_encode_midnight_and_cap():
    x = encode_input(SupplyContext(6000, 9000, 0.04, 0.29, second_of_day=0, day_of_year=1))
    assert x[4] == 0.0
    assert x[0] == 1.0 and x[1] == 1.0


def test_gene_counts():
    assert Layered().n_genes == 6 * 2 + 2 + 2 * 7 + 7
    assert FullyConnected().n_genes == (6 + 9) * 9 + 9


def test_zero_genome_outputs_zero():
    for topo in (Layered(), FullyConnected()):
        assert np.all(forward(zero_genome(topo), np.full(6, 0.7)) == 0.0)


def test_single_path_identity():
    topo = Layered(n_hidden=1, n_outputs=1, n_inputs=1)
    g = Genome(topo, [1.0, 0.0, 1.0, 0.0])
    assert forward(g, [0.5]) == pytest.approx([0.5])


def test_layered_matches_manual_loop():
    rng = np.random.default_rng(3)
    g = random_genome(Layered(), rng)
    x = rng.uniform(0, 1, 6)
    genes = g.genes
    hidden = [activate(sum(x[i] * genes[i * 2 + j] for i in range(6)) + genes[12 + j]) for j in range(2)]
    out = [activate(sum(hidden[j] * genes[14 + j * 7 + k] for j in range(2)) + genes[28 + k]) for k in range(7)]
    assert forward(g, x) == pytest.approx(out, abs=1e-12)


def test_fully_connected_recurrence():
    topo = FullyConnected(n_hidden=1, n_outputs=1, internal_steps=2, n_inputs=1)
    # neurons: h, o. w rows: input, h, o; cols: h, o
    w = [[1.0, 0.0],   # input -> h
         [0.0, 1.0],   # h -> o
         [0.0, 0.0]]
    g = Genome(topo, np.concatenate([np.ravel(w), [0.0, 0.0]]))
    # step 1: h = x, o = 0; step 2: o = h
    assert forward(g, [0.4]) == pytest.approx([0.4])
    g1 = Genome(FullyConnected(1, 1, 1, 1), g.genes)
    assert forward(g1, [0.4]) == pytest.approx([0.0])


def test_decode():
    assert decode_prices([-1.0]) == (0.0,)
    assert decode_prices([1.0], 2.5) == (2.5,)
    assert decode_prices([0.0], 1.0) == (0.5,)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       st.booleans(), st.floats(0.01, 100))
def test_outputs_bounded(seed, x, fc, p_scale):
    topo = FullyConnected() if fc else Layered()
    g = Genome(topo, np.random.default_rng(seed).normal(0, 5, topo.n_genes))
    out = forward(g, np.array(x))
    assert np.all(out >= -1) and np.all(out <= 1)
    prices = decode_prices(out, p_scale)
    assert all(0 <= p <= p_scale for p in prices)


def test_genome_validation():
    with pytest.raises(TopologyError):
        Genome(Layered(), np.zeros(3))
    with pytest.raises(TopologyError):
        Genome(Layered(), np.full(Layered().n_genes, np.nan))
    g = zero_genome(Layered())
    with pytest.raises(ValueError):
        g.genes[0] = 1.0


def test_policy_catalog_mismatch():
    pol = NeuralPolicy(zero_genome(Layered(n_outputs=3)))
    with pytest.raises(TopologyError, match="3 outputs"):
        pol.prices(SupplyContext(0, 0, 0, 0), SlaBook(), (1, 10, 30, 60, 120, 600, 1800))


@pytest.mark.parametrize("topo", [Layered(), FullyConnected(internal_steps=4)])
def test_checkpoint_roundtrip(tmp_path, topo):
    g = random_genome(topo, np.random.default_rng(11))
    p = tmp_path / "g.json"
    save_genome(p, g, p_scale=1.7, scales=InputScales(5000, 0.5))
    g2, p_scale, scales = loads_genome(p.read_text())
    assert g2 == g and g2.genes.tobytes() == g.genes.tobytes()
    assert p_scale == 1.7 and scales == InputScales(5000, 0.5)
    assert dumps_genome(g2, p_scale, scales) == p.read_text()


def test_checkpoint_errors(tmp_path):
    with pytest.raises(TopologyError):
        loads_genome("{not json")
    with pytest.raises(TopologyError):
        loads_genome('{"format": "other"}')
    p = tmp_path / "g.json"
    save_genome(p, zero_genome(Layered(n_outputs=5)))
    with pytest.raises(TopologyError, match="5 outputs"):
        load_policy(p, n_outputs=7)
    with pytest.raises(TopologyError, match="not found"):
        load_policy(tmp_path / "missing.json")
