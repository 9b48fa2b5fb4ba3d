"""Structural Verilog export of hard networks and a small interpreter for it.

The emitted module has one ``assign`` per logic gate (or one ``LUT<N>``
instance per table, Xilinx-style: ``O = INIT[{I<N-1>, ..., I0}]``), a
popcount adder tree per class group and a chain of comparators that picks
the first class with the largest count.

The interpreter accepts exactly the subset the emitter writes: ``wire``
declarations with optional assignment, ``assign`` statements, ``LUT<N>``
instances, and expressions built from identifiers, bit selects, sized or
plain literals, ``~ & ^ | >``, ``?:`` and ``{...}`` concatenation.
"""

from __future__ import annotations

import re

import numpy as np

from .cost import popcount_tree
from .network import HardNetwork

GATE_EXPR = (
    "1'b0", "{a} & {b}", "{a} & ~{b}", "{a}", "~{a} & {b}", "{b}", "{a} ^ {b}",
    "{a} | {b}", "~({a} | {b})", "~({a} ^ {b})", "~{b}", "{a} | ~{b}", "~{a}",
    "~{a} | {b}", "~({a} & {b})", "1'b1",
)


def _net(layer: int, idx: int) -> str:
    return f"l{layer}_n{idx}"


def emit_netlist(net: HardNetwork, module: str = "gatenet_top") -> str:
    if not isinstance(net, HardNetwork):
        raise TypeError("emit_netlist needs a discretized HardNetwork")
    cfg = net.config
    for t in net.tables:
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("network tables are not binary")
    n_cls = cfg.num_classes
    cls_bits = max(1, (n_cls - 1).bit_length())
    out = [
        f"// {cfg.neuron_kind} network, layers {list(cfg.layer_sizes)}, "
        f"{n_cls} classes of {cfg.group_size} outputs",
        f"module {module} (",
        f"  input  wire [{cfg.input_width - 1}:0] x,",
        f"  output wire [{cls_bits - 1}:0] cls",
        ");",
    ]

    def src(layer, i):
        return f"x[{i}]" if layer == 0 else _net(layer - 1, i)

    for k, (wires, table) in enumerate(zip(net.wiring, net.tables)):
        out.append(f"  // layer {k}")
        for j in range(len(wires)):
            name = _net(k, j)
            if cfg.neuron_kind == "gate":
                gate = int(net.gates[k][j]) if net.gates is not None else _gate_of(table[j])
                expr = GATE_EXPR[gate].format(a=src(k, wires[j, 0]), b=src(k, wires[j, 1]))
                out.append(f"  wire {name} = {expr};")
            else:
                n = cfg.lut_inputs
                init = sum(int(b) << i for i, b in enumerate(table[j]))
                digits = max(1, -(-(2**n) // 4))
                # Table index puts input 0 in the most significant position.
                pins = ", ".join(f".I{n - 1 - m}({src(k, wires[j, m])})" for m in range(n))
                out.append(f"  wire {name};")
                out.append(f"  LUT{n} #(.INIT({2**n}'h{init:0{digits}X})) "
                           f"u_{name} ({pins}, .O({name}));")

    last = len(net.wiring) - 1
    g = cfg.group_size
    count_width = g.bit_length()
    for c in range(n_cls):
        bits = [_net(last, c * g + i) for i in range(g)]
        tree = popcount_tree(bits, prefix=f"pc{c}")
        out.append(f"  // popcount, class {c}")
        for kind, ins, (s, co) in tree.cells:
            if kind == "FA":
                a, b, ci = ins
                out.append(f"  wire {s}_x = {a} ^ {b};")
                out.append(f"  wire {s} = {s}_x ^ {ci};")
                out.append(f"  wire {co} = ({a} & {b}) | ({ci} & {s}_x);")
            else:
                a, b = ins
                out.append(f"  wire {s} = {a} ^ {b};")
                out.append(f"  wire {co} = {a} & {b};")
        msb_first = list(reversed(tree.outputs))
        msb_first = ["1'b0"] * (count_width - len(msb_first)) + msb_first
        out.append(f"  wire [{count_width - 1}:0] cnt{c} = {{{', '.join(msb_first)}}};")

    out.append("  // argmax, first class wins ties")
    out.append(f"  wire [{count_width - 1}:0] best_v0 = cnt0;")
    out.append(f"  wire [{cls_bits - 1}:0] best_i0 = {cls_bits}'d0;")
    for c in range(1, n_cls):
        out.append(f"  wire take{c} = cnt{c} > best_v{c - 1};")
        out.append(f"  wire [{count_width - 1}:0] best_v{c} = take{c} ? cnt{c} : best_v{c - 1};")
        out.append(f"  wire [{cls_bits - 1}:0] best_i{c} = take{c} ? {cls_bits}'d{c} : best_i{c - 1};")
    out.append(f"  assign cls = best_i{n_cls - 1};")
    out.append("endmodule")
    return "\n".join(out) + "\n"


def _gate_of(table_row) -> int:
    return int(sum(int(b) << (3 - i) for i, b in enumerate(table_row)))


# Interpreter. Values are (int64 array over samples, width) pairs.

_TOKEN = re.compile(r"\s*(?:(\d+'[bdh][0-9a-fA-F_]+)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        tok = m.group(0).strip()
        if tok:
            tokens.append(tok)
        pos = m.end()
    return tokens


def _literal(tok: str) -> tuple[int, int]:
    if "'" in tok:
        size, rest = tok.split("'")
        base = {"b": 2, "d": 10, "h": 16}[rest[0]]
        return int(rest[1:].replace("_", ""), base), int(size)
    v = int(tok)
    return v, max(1, v.bit_length())


class _Parser:
    def __init__(self, tokens, env, n):
        self.toks, self.pos, self.env, self.n = tokens, 0, env, n

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if expected is not None and tok != expected:
            raise SyntaxError(f"expected {expected!r}, got {tok!r}")
        self.pos += 1
        return tok

    def parse(self):
        v = self.ternary()
        if self.peek() is not None:
            raise SyntaxError(f"trailing token {self.peek()!r}")
        return v

    def ternary(self):
        cond = self.bor()
        if self.peek() == "?":
            self.take()
            a = self.ternary()
            self.take(":")
            b = self.ternary()
            w = max(a[1], b[1])
            return np.where(cond[0] != 0, a[0], b[0]), w
        return cond

    def _binary(self, sub, op, fn):
        left = sub()
        while self.peek() == op:
            self.take()
            right = sub()
            left = fn(left[0], right[0]), max(left[1], right[1])
        return left

    def bor(self):
        return self._binary(self.bxor, "|", np.bitwise_or)

    def bxor(self):
        return self._binary(self.band, "^", np.bitwise_xor)

    def band(self):
        return self._binary(self.rel, "&", np.bitwise_and)

    def rel(self):
        left = self.unary()
        if self.peek() == ">":
            self.take()
            right = self.unary()
            return (left[0] > right[0]).astype(np.int64), 1
        return left

    def unary(self):
        if self.peek() == "~":
            self.take()
            v, w = self.unary()
            return (~v) & ((1 << w) - 1), w
        return self.primary()

    def primary(self):
        tok = self.take()
        if tok == "(":
            v = self.ternary()
            self.take(")")
            return v
        if tok == "{":
            parts = [self.ternary()]
            while self.peek() == ",":
                self.take()
                parts.append(self.ternary())
            self.take("}")
            val = np.zeros(self.n, dtype=np.int64)
            width = 0
            for v, w in parts:
                val = (val << w) | v
                width += w
            return val, width
        if tok is None:
            raise SyntaxError("unexpected end of expression")
        if tok[0].isdigit():
            v, w = _literal(tok)
            return np.full(self.n, v, dtype=np.int64), w
        if tok not in self.env:
            raise NameError(f"undefined net {tok!r}")
        v, w = self.env[tok]
        if self.peek() == "[":
            self.take()
            bit = int(self.take())
            self.take("]")
            return (v >> bit) & 1, 1
        return v, w


_WIRE = re.compile(r"^wire\s*(?:\[(\d+):0\])?\s*([A-Za-z_]\w*)\s*(?:=\s*(.+))?;$")
_ASSIGN = re.compile(r"^assign\s+([A-Za-z_]\w*)\s*=\s*(.+);$")
_LUT = re.compile(r"^LUT(\d+)\s*#\(\.INIT\(([^)]+)\)\)\s*\w+\s*\((.*)\);$")
_PIN = re.compile(r"\.(I\d+|O)\(([^()]+)\)")
_PORT = re.compile(r"^(input|output)\s+wire\s*(?:\[(\d+):0\])?\s*([A-Za-z_]\w*),?$")


def simulate_netlist(text: str, inputs) -> np.ndarray:
    """Run the emitted module on a (B, width) 0/1 array; returns ``cls`` per row."""
    x = np.asarray(inputs, dtype=np.int64)
    if x.ndim == 1:
        x = x[None]
    n = len(x)
    env: dict[str, tuple[np.ndarray, int]] = {}
    widths: dict[str, int] = {}
    output = None
    for raw in text.splitlines():
        line = raw.split("//")[0].strip()
        if not line or line.startswith(("module", "endmodule")) or line == ");":
            continue
        if m := _PORT.match(line):
            direction, hi, name = m.groups()
            w = int(hi) + 1 if hi else 1
            if direction == "input":
                if x.shape[1] != w:
                    raise ValueError(f"netlist expects {w} inputs, got {x.shape[1]}")
                # Inputs wider than 63 bits do not fit int64; keep them as bit columns.
                widths[name] = w
                env[name] = _InputBus(x), w
            else:
                output = name
                widths[name] = w
            continue
        if m := _WIRE.match(line):
            hi, name, expr = m.groups()
            widths[name] = int(hi) + 1 if hi else 1
            if expr is not None:
                env[name] = _eval(expr, env, n, widths[name])
            continue
        if m := _ASSIGN.match(line):
            name, expr = m.groups()
            env[name] = _eval(expr, env, n, widths.get(name, 1))
            continue
        if m := _LUT.match(line):
            k, init_tok, pins = m.groups()
            k = int(k)
            init, _ = _literal(init_tok)
            conns = dict(_PIN.findall(pins))
            index = np.zeros(n, dtype=np.int64)
            for i in range(k):
                v, _ = _eval(conns[f"I{i}"], env, n, 1)
                index |= v << i
            table = np.array([(init >> i) & 1 for i in range(2**k)], dtype=np.int64)
            env[conns["O"].strip()] = table[index], 1
            continue
        raise SyntaxError(f"unsupported netlist line: {raw!r}")
    if output is None or output not in env:
        raise ValueError("netlist output never assigned")
    return env[output][0]


class _InputBus:
    """Input port; only bit selects are supported."""

    def __init__(self, x):
        self.x = x

    def __rshift__(self, bit):
        return self.x[:, bit]


def _eval(expr, env, n, width):
    v, w = _Parser(_tokenize(expr), env, n).parse()
    return v & ((1 << width) - 1), width
