"""Fixed-topology linear-threshold networks used as pricing brokers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import TopologyError

N_INPUTS = 6
CHECKPOINT_FORMAT = "microgrid-sla-genome/1"


def activate(x: float) -> float:
    if x <= -1.0:
        return -1.0
    if x < 1.0:
        return x
    return 1.0


@dataclass(frozen=True)
class Layered:
    """Input -> hidden -> output, fully connected between consecutive layers."""

    n_hidden: int = 2
    n_outputs: int = 7
    n_inputs: int = N_INPUTS

    @property
    def n_genes(self) -> int:
        return (self.n_inputs * self.n_hidden + self.n_hidden
                + self.n_hidden * self.n_outputs + self.n_outputs)

    @property
    def n_weights(self) -> int:
        return self.n_inputs * self.n_hidden + self.n_hidden * self.n_outputs

    @property
    def n_biases(self) -> int:
        return self.n_hidden + self.n_outputs


@dataclass(frozen=True)
class FullyConnected:
    """Every neuron (inputs included) feeds every non-input neuron.

    Non-input neurons are the ``n_hidden`` hidden units followed by the
    ``n_outputs`` output units. The recurrence runs ``internal_steps`` times
    from an all-zero state each trading cycle.
    """

    n_hidden: int = 2
    n_outputs: int = 7
    internal_steps: int = 3
    n_inputs: int = N_INPUTS

    @property
    def n_neurons(self) -> int:
        return self.n_hidden + self.n_outputs

    @property
    def n_weights(self) -> int:
        return (self.n_inputs + self.n_neurons) * self.n_neurons

    @property
    def n_biases(self) -> int:
        return self.n_neurons

    @property
    def n_genes(self) -> int:
        return self.n_weights + self.n_biases


Topology = Union[Layered, FullyConnected]


def _check_topology(topo) -> None:
    if topo.n_inputs < 1 or topo.n_hidden < 1 or topo.n_outputs < 1:
        raise TopologyError(f"layer sizes must be positive: {topo}")
    if isinstance(topo, FullyConnected) and topo.internal_steps < 1:
        raise TopologyError("internal_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class Genome:
    topology: Topology
    genes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_topology(self.topology)
        genes = np.array(self.genes, dtype=np.float64).ravel()
        if genes.size != self.topology.n_genes:
            raise TopologyError(f"genome has {genes.size} genes, topology {self.topology} needs {self.topology.n_genes}")
        if not np.all(np.isfinite(genes)):
            raise TopologyError("genome contains non-finite genes")
        genes.setflags(write=False)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "_unpacked", _unpack(self.topology, genes))

    def __eq__(self, other):
        return (isinstance(other, Genome) and self.topology == other.topology
                and self.genes.tobytes() == other.genes.tobytes())

    def __hash__(self):
        return hash((self.topology, self.genes.tobytes()))

    def key(self) -> bytes:
        return self.genes.tobytes()


def _unpack(topo, genes: np.ndarray):
    if isinstance(topo, Layered):
        i, h, o = topo.n_inputs, topo.n_hidden, topo.n_outputs
        a = i * h
        w_ih = genes[:a].reshape(i, h)
        b_h = genes[a:a + h]
        a += h
        w_ho = genes[a:a + h * o].reshape(h, o)
        b_o = genes[a + h * o:]
        return w_ih, b_h, w_ho, b_o
    n, m = topo.n_inputs, topo.n_neurons
    w = genes[:(n + m) * m].reshape(n + m, m)
    b = genes[(n + m) * m:]
    return w, b


def random_genome(topo: Topology, rng: np.random.Generator) -> Genome:
    return Genome(topo, rng.uniform(-1.0, 1.0, topo.n_genes))


def zero_genome(topo: Topology) -> Genome:
    return Genome(topo, np.zeros(topo.n_genes))


def forward(g: Genome, x) -> np.ndarray:
    """Network outputs in [-1, 1] for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    topo = g.topology
    if x.shape != (topo.n_inputs,):
        raise TopologyError(f"expected {topo.n_inputs} inputs, got shape {x.shape}")
    if isinstance(topo, Layered):
        w_ih, b_h, w_ho, b_o = g._unpacked
        h = np.clip(x @ w_ih + b_h, -1.0, 1.0)
        return np.clip(h @ w_ho + b_o, -1.0, 1.0)
    w, b = g._unpacked
    state = np.zeros(topo.n_inputs + topo.n_neurons)
    state[:topo.n_inputs] = x
    for _ in range(topo.internal_steps):
        state[topo.n_inputs:] = np.clip(state @ w + b, -1.0, 1.0)
    return state[-topo.n_outputs:].copy()


@dataclass(frozen=True)
class InputScales:
    power: float = 6000.0
    price: float = 1.0


def encode_input(ctx, scales: InputScales = InputScales()) -> np.ndarray:
    """Normalize a supply context to six network inputs in [0, 1]."""
    day = math.sin(math.pi * ctx.day_of_year / 365.0)
    return np.array([
        min(ctx.P_re / scales.power, 1.0),
        min(ctx.P_grid / scales.power, 1.0),
        min(ctx.fit / scales.price, 1.0),
        min(ctx.get / scales.price, 1.0),
        math.sin(math.pi * ctx.second_of_day / 86400.0),
        day if day > 0.0 else 0.0,
    ])


def decode_prices(out, p_scale: float = 1.0) -> tuple[float, ...]:
    return tuple(float((o + 1.0) * 0.5 * p_scale) for o in out)


@dataclass(frozen=True)
class NeuralPolicy:
    genome: Genome
    p_scale: float = 1.0
    scales: InputScales = InputScales()
    name: str = "neural"

    def prices(self, ctx, book, durations):
        if self.genome.topology.n_outputs != len(durations):
            raise TopologyError(
                f"network has {self.genome.topology.n_outputs} outputs but the catalog has {len(durations)} durations")
        return decode_prices(forward(self.genome, encode_input(ctx, self.scales)), self.p_scale)


# -- checkpoints -----------------------------------------------------------

def _topology_dict(topo) -> dict:
    if isinstance(topo, Layered):
        return {"kind": "layered", "n_inputs": topo.n_inputs, "n_hidden": topo.n_hidden, "n_outputs": topo.n_outputs}
    return {"kind": "fully_connected", "n_inputs": topo.n_inputs, "n_hidden": topo.n_hidden,
            "n_outputs": topo.n_outputs, "internal_steps": topo.internal_steps}


def topology_from_dict(d: dict) -> Topology:
    try:
        kind = d["kind"]
        if kind == "layered":
            return Layered(n_hidden=int(d["n_hidden"]), n_outputs=int(d["n_outputs"]), n_inputs=int(d["n_inputs"]))
        if kind == "fully_connected":
            return FullyConnected(n_hidden=int(d["n_hidden"]), n_outputs=int(d["n_outputs"]),
                                  internal_steps=int(d["internal_steps"]), n_inputs=int(d["n_inputs"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TopologyError(f"bad topology header: {exc}") from None
    raise TopologyError(f"unknown topology kind {kind!r}")


def dumps_genome(g: Genome, p_scale: float = 1.0, scales: InputScales = InputScales(), extra: dict | None = None) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "topology": _topology_dict(g.topology),
        "p_scale": float(p_scale).hex(),
        "power_scale": float(scales.power).hex(),
        "price_scale": float(scales.price).hex(),
        "genes": [float(v).hex() for v in g.genes],
    }
    if extra:
        doc["meta"] = extra
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_genome(path, g: Genome, p_scale: float = 1.0, scales: InputScales = InputScales(), extra: dict | None = None) -> None:
    Path(path).write_text(dumps_genome(g, p_scale, scales, extra), encoding="utf-8")


def loads_genome(text: str) -> tuple[Genome, float, InputScales]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise TopologyError("not a genome checkpoint")
    topo = topology_from_dict(doc.get("topology", {}))
    try:
        genes = np.array([float.fromhex(v) for v in doc["genes"]])
        p_scale = float.fromhex(doc["p_scale"])
        scales = InputScales(float.fromhex(doc["power_scale"]), float.fromhex(doc["price_scale"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TopologyError(f"malformed checkpoint: {exc}") from None
    return Genome(topo, genes), p_scale, scales


def load_genome(path) -> tuple[Genome, float, InputScales]:
    path = Path(path)
    if not path.is_file():
        raise TopologyError(f"checkpoint not found: {path}")
    return loads_genome(path.read_text(encoding="utf-8"))


def load_policy(path, n_outputs: int | None = None) -> NeuralPolicy:
    g, p_scale, scales = load_genome(path)
    if n_outputs is not None and g.topology.n_outputs != n_outputs:
        raise TopologyError(
            f"checkpoint {path} has {g.topology.n_outputs} outputs, scenario catalog needs {n_outputs}")
    return NeuralPolicy(g, p_scale, scales)
