"""Gate-count and FLOP estimates.

Conventions:

* one floating-point operation is worth 100 two-input gate operations;
* an N-input LUT is a 2**N:1 multiplexer built from 3 * (2**N - 1) gates;
* the readout is one popcount adder tree per class group, built by column
  compression (full adders while a column holds three or more bits, a half
  adder when two remain). A full adder costs 5 gates, a half adder 2.

Preprocessing FLOPs are not modelled here; callers pass the figure in.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field

GATES_PER_FLOP = 100
FULL_ADDER_GATES = 5
HALF_ADDER_GATES = 2
PREPROC_FLOPS = 2246  # published preprocessing cost, taken as given


def gates_per_neuron(neuron_kind: str, lut_inputs: int | None = None) -> int:
    if neuron_kind == "gate":
        return 1
    if neuron_kind == "lut":
        if not lut_inputs or lut_inputs < 1:
            raise ValueError("LUT networks need lut_inputs >= 1")
        return 3 * (2**lut_inputs - 1)
    raise ValueError(f"unknown neuron kind {neuron_kind!r}")


def network_gates(neuron_kind: str, layer_counts, lut_inputs: int | None = None) -> int:
    return sum(int(n) for n in layer_counts) * gates_per_neuron(neuron_kind, lut_inputs)


def network_flops(neuron_kind: str, layer_counts, lut_inputs: int | None = None) -> float:
    return network_gates(neuron_kind, layer_counts, lut_inputs) / GATES_PER_FLOP


@dataclass
class AdderTree:
    """Popcount tree over named input bits.

    ``cells`` lists ``(kind, inputs, (sum, carry))`` in evaluation order
    with ``kind`` in {"FA", "HA"}; ``outputs`` are the count bits, least
    significant first.
    """

    cells: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    @property
    def full_adders(self) -> int:
        return sum(1 for c in self.cells if c[0] == "FA")

    @property
    def half_adders(self) -> int:
        return sum(1 for c in self.cells if c[0] == "HA")

    @property
    def gates(self) -> int:
        return self.full_adders * FULL_ADDER_GATES + self.half_adders * HALF_ADDER_GATES


def popcount_tree(bits, prefix: str = "pc") -> AdderTree:
    tree = AdderTree()
    columns = [deque(bits)]
    counter = 0
    w = 0
    while w < len(columns):
        col = columns[w]
        while len(col) >= 2:
            if w + 1 == len(columns):
                columns.append(deque())
            if len(col) >= 3:
                ins = (col.popleft(), col.popleft(), col.popleft())
                kind = "FA"
            else:
                ins = (col.popleft(), col.popleft())
                kind = "HA"
            s, c = f"{prefix}_s{counter}", f"{prefix}_c{counter}"
            counter += 1
            tree.cells.append((kind, ins, (s, c)))
            col.append(s)
            columns[w + 1].append(c)
        w += 1
    tree.outputs = [col[0] if col else None for col in columns]
    while tree.outputs and tree.outputs[-1] is None:
        tree.outputs.pop()
    return tree


def readout_gates(last_layer_size: int, num_classes: int) -> int:
    if last_layer_size % num_classes:
        raise ValueError(f"{num_classes} classes do not divide {last_layer_size} outputs")
    group = last_layer_size // num_classes
    return num_classes * popcount_tree([f"b{i}" for i in range(group)]).gates


def readout_flops(last_layer_size: int, num_classes: int) -> float:
    return readout_gates(last_layer_size, num_classes) / GATES_PER_FLOP


@dataclass
class CostReport:
    gates_network: int
    flops_network: float
    gates_readout: int
    flops_readout: float
    flops_preproc: float
    luts_by_fanin: dict[int, int]

    @property
    def flops_total(self) -> float:
        return self.flops_network + self.flops_readout + self.flops_preproc

    def rows(self) -> list[tuple[str, object]]:
        rows = [
            ("gates_network", self.gates_network),
            ("flops_network", self.flops_network),
            ("gates_readout", self.gates_readout),
            ("flops_readout", self.flops_readout),
            ("flops_preproc", self.flops_preproc),
            ("flops_total", self.flops_total),
        ]
        rows += [(f"luts_fanin_{k}", v) for k, v in sorted(self.luts_by_fanin.items())]
        return rows

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# gate costs: full adder=5, half adder=2, LUT(N)=3*(2^N-1); "
                    "1 FLOP = 100 gates"])
        w.writerow(["quantity", "value"])
        for k, v in self.rows():
            w.writerow([k, f"{v:g}" if isinstance(v, float) else v])
        return buf.getvalue()

    def table(self) -> str:
        lines = ["readout convention: popcount by column compression, "
                 "full adder = 5 gates, half adder = 2 gates"]
        lines += [f"{k:<16} {v:>12g}" if isinstance(v, float) else f"{k:<16} {v:>12}"
                  for k, v in self.rows()]
        return "\n".join(lines)


def cost_report(config, preproc_flops: float = PREPROC_FLOPS) -> CostReport:
    """Cost of a network described by a :class:`~gatenet.network.NetworkConfig`."""
    kind, n = config.neuron_kind, config.lut_inputs
    fan_in = 2 if kind == "gate" else n
    g_net = network_gates(kind, config.layer_sizes, n)
    g_ro = readout_gates(config.layer_sizes[-1], config.num_classes)
    return CostReport(g_net, g_net / GATES_PER_FLOP, g_ro, g_ro / GATES_PER_FLOP,
                      float(preproc_flops), {fan_in: sum(config.layer_sizes)})
