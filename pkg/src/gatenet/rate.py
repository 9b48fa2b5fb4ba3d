"""Rate-coded inference with finite Bernoulli bit streams.

A feature value ``r`` in [0, 1] becomes a stream of independent
Bernoulli(r) bits. The hard network runs once per time step and every
final-layer gate feeds a saturating counter; class scores are the per-group
sums of those counters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import logic, metrics
from .network import HardNetwork, simulate_packed

DEFAULT_COUNTER_BITS = 8


@dataclass(frozen=True)
class BitStreamBatch:
    streams: np.ndarray  # (input_width, length) uint8
    seed: int

    @property
    def length(self) -> int:
        return self.streams.shape[1]

    @property
    def width(self) -> int:
        return self.streams.shape[0]


def _check_rates(rates) -> np.ndarray:
    rates = np.asarray(rates, dtype=np.float64)
    if not np.all(np.isfinite(rates)) or np.any(rates < 0) or np.any(rates > 1):
        raise ValueError("rates must lie in [0, 1]")
    return rates


def encode_stream(rates, length: int, seed: int) -> BitStreamBatch:
    rates = _check_rates(rates)
    if rates.ndim != 1:
        raise ValueError(f"expected a rate vector, got shape {rates.shape}")
    if int(length) != length or length < 1:
        raise ValueError(f"stream length must be >= 1, got {length!r}")
    rng = np.random.default_rng(seed)
    bits = rng.random((rates.size, int(length))) < rates[:, None]
    return BitStreamBatch(bits.astype(np.uint8), seed)


def _pack_streams(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Pack (samples, width, L) bits into (width, samples*words) uint64.

    Each sample owns ``words`` consecutive words; returns the packed lines,
    the per-word valid-bit masks and ``words``.
    """
    n, d, L = bits.shape
    words = -(-L // 64)
    padded = np.zeros((d, n, words * 64), dtype=np.uint8)
    padded[:, :, :L] = bits.transpose(1, 0, 2)
    packed = np.packbits(padded, axis=2, bitorder="little")
    packed = np.ascontiguousarray(packed).view("<u8").astype(np.uint64).reshape(d, n * words)
    valid = np.zeros(words * 64, dtype=np.uint8)
    valid[:L] = 1
    mask = np.packbits(valid, bitorder="little").view("<u8").astype(np.uint64)
    return packed, mask, words


def _counters(net: HardNetwork, bits: np.ndarray, counter_bits: int | None) -> np.ndarray:
    """Per-sample, per-output-gate counters for (samples, width, L) streams."""
    n, _, L = bits.shape
    packed, mask, words = _pack_streams(bits)
    out = simulate_packed(net, packed).reshape(-1, n, words) & mask
    counts = np.bitwise_count(out).sum(axis=2, dtype=np.int64).T
    if counter_bits is not None:
        counts = np.minimum(counts, 2**counter_bits - 1)
    return counts


def _group_sums(net: HardNetwork, counters: np.ndarray) -> np.ndarray:
    cfg = net.config
    return counters.reshape(len(counters), cfg.num_classes, cfg.group_size).sum(axis=2)


def gate_counters(net: HardNetwork, batch: BitStreamBatch,
                  counter_bits: int | None = DEFAULT_COUNTER_BITS) -> np.ndarray:
    """Saturating ones-counters of every final-layer gate over the stream."""
    if batch.width != net.config.input_width:
        raise ValueError(
            f"stream width {batch.width} does not match network input width "
            f"{net.config.input_width}")
    return _counters(net, batch.streams[None], counter_bits)[0]


def infer_rate(net: HardNetwork, batch: BitStreamBatch,
               counter_bits: int | None = DEFAULT_COUNTER_BITS):
    """Return ``(predicted_class, group_sums)`` for one rate-coded sample."""
    sums = _group_sums(net, gate_counters(net, batch, counter_bits)[None])[0]
    return int(np.argmax(sums)), sums


def counter_bits_for(length: int) -> int:
    """Smallest counter width (at least 8 bits) that cannot saturate."""
    return max(DEFAULT_COUNTER_BITS, int(length).bit_length())


def predict_rate(net: HardNetwork, rates, length: int, seed: int,
                 counter_bits: int | None = DEFAULT_COUNTER_BITS,
                 chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Rate-coded predictions for a (B, width) feature matrix.

    Streams are drawn from one generator seeded with ``seed``, chunk by
    chunk in sample order, so results are reproducible for a fixed
    ``chunk``. Returns ``(predictions, group_sums)``.
    """
    rates = _check_rates(rates)
    if rates.ndim != 2 or rates.shape[1] != net.config.input_width:
        raise ValueError(
            f"feature width {rates.shape[-1]} does not match network input width "
            f"{net.config.input_width}")
    if length < 1:
        raise ValueError("stream length must be >= 1")
    rng = np.random.default_rng(seed)
    sums = []
    for start in range(0, len(rates), chunk):
        r = rates[start:start + chunk]
        bits = (rng.random((len(r), r.shape[1], length)) < r[:, :, None]).astype(np.uint8)
        sums.append(_group_sums(net, _counters(net, bits, counter_bits)))
    sums = np.concatenate(sums) if sums else np.zeros((0, net.config.num_classes), np.int64)
    return np.argmax(sums, axis=1), sums


def expected_outputs(net: HardNetwork, rates, *, all_layers: bool = False):
    """Infinite-stream limit: propagate rates through the real-valued forms
    of the hard network's gates or tables."""
    cfg = net.config
    h = np.asarray(rates, dtype=np.float64)
    if h.ndim == 1:
        h = h[None]
    s = logic.selector_matrix(cfg.lut_inputs) if cfg.neuron_kind == "lut" else None
    layers = []
    for wires, table in zip(net.wiring, net.tables):
        t = table.astype(np.float64)
        if cfg.neuron_kind == "gate":
            a, b = h[:, wires[:, 0]], h[:, wires[:, 1]]
            h = (t[:, 0] * (1 - a) * (1 - b) + t[:, 1] * (1 - a) * b
                 + t[:, 2] * a * (1 - b) + t[:, 3] * a * b)
        else:
            h, _ = logic.lut_layer_forward(t, h[:, wires], s)
        layers.append(h)
    return layers if all_layers else h


def predict_expected(net: HardNetwork, rates) -> np.ndarray:
    out = expected_outputs(net, rates)
    cfg = net.config
    scores = out.reshape(len(out), cfg.num_classes, cfg.group_size).sum(axis=2)
    return np.argmax(scores, axis=1)


def rate_sweep(net: HardNetwork, features, labels, lengths, seeds=(0,),
               counter_bits: int | None = None) -> list[dict]:
    """Accuracy and jk-index at each stream length and seed.

    Counters default to a width that cannot saturate at the given length.
    Rows carry keys ``L, accuracy, jk_index, seed``; for each length a
    final row with ``seed == "mean"`` averages over seeds. ``jk_index`` is
    NaN unless the network has the four arrhythmia classes.
    """
    lengths = list(lengths)
    if not lengths:
        raise ValueError("no stream lengths given")
    labels = np.asarray(labels)
    rows = []
    for L in lengths:
        bits = counter_bits_for(L) if counter_bits is None else counter_bits
        per_seed = []
        for seed in seeds:
            pred, _ = predict_rate(net, features, L, seed, bits)
            acc = float(np.mean(pred == labels)) if len(labels) else float("nan")
            jk = (metrics.jk_index(metrics.confusion(pred, labels))
                  if net.config.num_classes == len(metrics.CLASSES) else float("nan"))
            per_seed.append({"L": int(L), "accuracy": acc, "jk_index": jk, "seed": seed})
        rows.extend(per_seed)
        rows.append({
            "L": int(L),
            "accuracy": float(np.mean([r["accuracy"] for r in per_seed])),
            "jk_index": float(np.mean([r["jk_index"] for r in per_seed])),
            "seed": "mean",
        })
    return rows


def sweep_csv(rows) -> str:
    lines = ["L,accuracy,jk_index,seed"]
    for r in rows:
        lines.append(f"{r['L']},{r['accuracy']:.6f},{r['jk_index']:.6f},{r['seed']}")
    return "\n".join(lines) + "\n"
