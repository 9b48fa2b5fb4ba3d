"""Layered logic-gate and LUT networks: construction, training, discretization.

A network is a stack of layers with fixed random wiring. Gate layers learn a
softmax distribution over the 16 two-input gates; LUT layers learn ``2**N``
table entries that are thresholded at 0.5 on every forward pass (gradients
pass straight through the threshold). The final layer is split into
``num_classes`` contiguous groups whose sums, divided by the temperature,
are the class logits.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import zipfile
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import logic

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


class TrainingError(FloatingPointError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple[int, ...]
    input_width: int
    num_classes: int
    neuron_kind: str = "gate"
    lut_inputs: int = 2
    temperature: float = 1.0
    seed: int = 0
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 100

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if not self.layer_sizes:
            raise ConfigError("at least one layer is required")
        if any(n < 1 for n in self.layer_sizes):
            raise ConfigError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.input_width < 1 or self.num_classes < 1:
            raise ConfigError("input_width and num_classes must be >= 1")
        if self.layer_sizes[-1] % self.num_classes:
            raise ConfigError(
                f"num_classes={self.num_classes} does not divide the last layer "
                f"size {self.layer_sizes[-1]}"
            )
        if self.neuron_kind not in ("gate", "lut"):
            raise ConfigError(f"neuron_kind must be 'gate' or 'lut', got {self.neuron_kind!r}")
        if self.neuron_kind == "lut" and not 1 <= self.lut_inputs <= 16:
            raise ConfigError(f"lut_inputs must be in 1..16, got {self.lut_inputs}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")

    @property
    def fan_in(self) -> int:
        return 2 if self.neuron_kind == "gate" else self.lut_inputs

    @property
    def group_size(self) -> int:
        return self.layer_sizes[-1] // self.num_classes

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SoftNetwork:
    config: NetworkConfig
    wiring: list[np.ndarray]
    params: list[np.ndarray]

    def copy(self) -> "SoftNetwork":
        return SoftNetwork(self.config, [w.copy() for w in self.wiring],
                           [p.copy() for p in self.params])


@dataclass
class HardNetwork:
    """Fully binary network.

    ``tables[k]`` holds one truth table per neuron of layer ``k``: 4 bits
    indexed by ``2*x0 + x1`` for gates, ``2**N`` bits indexed big-endian by
    the LUT inputs otherwise. For gate networks ``gates[k]`` also keeps the
    chosen gate indices.
    """

    config: NetworkConfig
    wiring: list[np.ndarray]
    tables: list[np.ndarray]
    gates: list[np.ndarray] | None = None

    @property
    def groups(self) -> np.ndarray:
        """Class index owning each final-layer output."""
        return np.repeat(np.arange(self.config.num_classes), self.config.group_size)


def _layer_widths(config: NetworkConfig) -> list[int]:
    return [config.input_width, *config.layer_sizes]


def random_wiring(rng: np.random.Generator, in_width: int, out_width: int, fan_in: int) -> np.ndarray:
    """Draw ``fan_in`` input indices per neuron; distinct when ``in_width`` allows."""
    if in_width >= fan_in:
        idx = np.argsort(rng.random((out_width, in_width)), axis=1)[:, :fan_in]
    else:
        idx = rng.integers(0, in_width, size=(out_width, fan_in))
    return idx.astype(np.int64)


def build_network(config: NetworkConfig) -> SoftNetwork:
    rng = np.random.default_rng(config.seed)
    widths = _layer_widths(config)
    wiring, params = [], []
    for k, out_width in enumerate(config.layer_sizes):
        wiring.append(random_wiring(rng, widths[k], out_width, config.fan_in))
        if config.neuron_kind == "gate":
            params.append(rng.uniform(-0.1, 0.1, size=(out_width, logic.NUM_GATES)))
        else:
            params.append(rng.uniform(0.0, 1.0, size=(out_width, 2**config.lut_inputs)))
    return SoftNetwork(config, wiring, params)


def _check_input(config: NetworkConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.input_width:
        raise ValueError(
            f"input width {x.shape[-1] if x.ndim else 0} does not match network "
            f"input width {config.input_width}"
        )
    return x


def binarize_lut(W: np.ndarray) -> np.ndarray:
    return (np.clip(W, 0.0, 1.0) >= 0.5).astype(np.float64)


def _forward_layers(net: SoftNetwork, x: np.ndarray, keep_cache: bool):
    cfg = net.config
    s = logic.selector_matrix(cfg.lut_inputs) if cfg.neuron_kind == "lut" else None
    h = x
    caches = []
    for wires, param in zip(net.wiring, net.params):
        if cfg.neuron_kind == "gate":
            probs = logic.softmax(param)
            a, b = h[:, wires[:, 0]], h[:, wires[:, 1]]
            out = logic.gate_layer_forward(probs, a, b)
            cache = (probs, a, b)
        else:
            L = h[:, wires]
            out, lut_cache = logic.lut_layer_forward(binarize_lut(param), L, s)
            cache = lut_cache
        caches.append((h.shape[1], cache) if keep_cache else None)
        h = out
    return h, caches


def class_scores(config: NetworkConfig, outputs: np.ndarray) -> np.ndarray:
    """Per-class group sums of the final layer, shape (B, num_classes)."""
    B = outputs.shape[0]
    return outputs.reshape(B, config.num_classes, config.group_size).sum(axis=2)


def forward_soft(net: SoftNetwork, x, *, return_cache: bool = False):
    """Class probabilities for inputs in [0, 1].

    Accepts a single vector or a (B, input_width) batch. Returns
    ``(probs, activations)``; activations are the final-layer outputs, or the
    full per-layer cache when ``return_cache`` is set.
    """
    cfg = net.config
    x = _check_input(cfg, x)
    out, caches = _forward_layers(net, x, keep_cache=return_cache)
    scores = class_scores(cfg, out) / cfg.temperature
    probs = logic.softmax(scores, axis=1)
    return probs, (caches, out) if return_cache else out


def _scatter_matrices(net: SoftNetwork) -> list[list[sparse.csr_matrix]]:
    """Per layer and fan-in slot, a sparse (O, I) one-hot matrix mapping
    neuron input gradients back onto the previous layer."""
    widths = _layer_widths(net.config)
    mats = []
    for k, wires in enumerate(net.wiring):
        O = wires.shape[0]
        per_slot = []
        for j in range(wires.shape[1]):
            per_slot.append(sparse.csr_matrix(
                (np.ones(O), (np.arange(O), wires[:, j])), shape=(O, widths[k])))
        mats.append(per_slot)
    return mats


def _loss_and_grads(net, x, y, scatter):
    cfg = net.config
    probs, (caches, out) = forward_soft(net, x, return_cache=True)
    B = x.shape[0]
    loss = -np.mean(np.log(np.clip(probs[np.arange(B), y], 1e-300, None)))
    g_scores = probs.copy()
    g_scores[np.arange(B), y] -= 1.0
    g_scores /= B * cfg.temperature
    grad_h = np.repeat(g_scores, cfg.group_size, axis=1)
    s = logic.selector_matrix(cfg.lut_inputs) if cfg.neuron_kind == "lut" else None
    grads = [None] * len(net.params)
    for k in range(len(net.params) - 1, -1, -1):
        _, cache = caches[k]
        if cfg.neuron_kind == "gate":
            probs_k, a, b = cache
            gw, ga, gb = logic.gate_layer_backward(probs_k, a, b, grad_h)
            grads[k] = gw
            slot_grads = (ga, gb)
        else:
            gW, gL = logic.lut_layer_backward(binarize_lut(net.params[k]), s, cache, grad_h)
            grads[k] = gW
            slot_grads = tuple(gL[:, :, j] for j in range(gL.shape[2]))
        if k > 0:
            grad_h = sum((m.T @ g.T).T for m, g in zip(scatter[k], slot_grads))
    return loss, grads


@dataclass
class _Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mean_loss(net: SoftNetwork, x, y, batch_size: int = 1000) -> float:
    x = _check_input(net.config, x)
    y = np.asarray(y)
    total = 0.0
    for i in range(0, len(x), batch_size):
        probs, _ = forward_soft(net, x[i:i + batch_size])
        rows = np.arange(len(probs))
        total += -np.log(np.clip(probs[rows, y[i:i + batch_size]], 1e-300, None)).sum()
    return total / len(x)


def predict_soft(net: SoftNetwork, x, batch_size: int = 1000) -> np.ndarray:
    x = _check_input(net.config, x)
    preds = [np.argmax(forward_soft(net, x[i:i + batch_size])[0], axis=1)
             for i in range(0, len(x), batch_size)]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def train(net: SoftNetwork, x, y, *, epochs: int | None = None,
          batch_size: int | None = None, learning_rate: float | None = None,
          heldout=None, history: list | None = None, on_epoch=None,
          record_initial: bool = False) -> SoftNetwork:
    """Mini-batch Adam on the cross-entropy of the tempered group-sum softmax.

    Returns a trained copy; ``net`` is left untouched. Per-epoch statistics
    are appended to ``history`` (when given) and passed to ``on_epoch``.
    ``heldout`` is an optional ``(x, y)`` pair evaluated after each epoch.
    With ``record_initial`` an epoch-0 entry with the untrained training loss
    is recorded first.
    """
    cfg = net.config
    epochs = cfg.epochs if epochs is None else epochs
    batch_size = cfg.batch_size if batch_size is None else batch_size
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    x = _check_input(cfg, x)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("training set is empty")
    if len(y) != len(x):
        raise ValueError(f"{len(x)} inputs but {len(y)} labels")
    if y.min() < 0 or y.max() >= cfg.num_classes:
        raise ValueError(f"labels must be in 0..{cfg.num_classes - 1}")

    net = net.copy()
    scatter = _scatter_matrices(net)
    opt = _Adam(lr)
    rng = np.random.default_rng([cfg.seed, 1])

    def report(stats):
        if history is not None:
            history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)

    if record_initial:
        stats = {"epoch": 0, "train_loss": mean_loss(net, x, y)}
        if heldout is not None:
            stats.update(_heldout_stats(net, heldout))
        report(stats)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(x))
        losses = []
        for bi, start in enumerate(range(0, len(x), batch_size)):
            idx = order[start:start + batch_size]
            loss, grads = _loss_and_grads(net, x[idx], y[idx], scatter)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            opt.step(net.params, grads)
            if cfg.neuron_kind == "lut":
                for p in net.params:
                    np.clip(p, 0.0, 1.0, out=p)
            losses.append(loss)
        stats = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if heldout is not None:
            stats.update(_heldout_stats(net, heldout))
        report(stats)
    return net


def _heldout_stats(net, heldout):
    hx, hy = heldout
    hx = _check_input(net.config, hx)
    hy = np.asarray(hy)
    return {
        "heldout_loss": mean_loss(net, hx, hy),
        "heldout_accuracy": float(np.mean(predict_soft(net, hx) == hy)),
    }


def discretize(net: SoftNetwork) -> HardNetwork:
    cfg = net.config
    tables, gates = [], []
    for param in net.params:
        if cfg.neuron_kind == "gate":
            # np.argmax returns the lowest index among ties.
            g = np.argmax(logic.softmax(param), axis=1).astype(np.uint8)
            gates.append(g)
            tables.append(logic.TRUTH_TABLES[g])
        else:
            tables.append((np.asarray(param) >= 0.5).astype(np.uint8))
    return HardNetwork(cfg, [w.copy() for w in net.wiring], tables,
                       gates if cfg.neuron_kind == "gate" else None)


# Bit-parallel hard evaluation: each input line is a uint64 word array,
# one bit per sample (or per time step).

_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_ZERO = np.uint64(0)


def pack_columns(bits: np.ndarray) -> np.ndarray:
    """Pack a (B, W) 0/1 array into (W, ceil(B/64)) uint64 words, sample
    ``b`` at bit ``b % 64`` of word ``b // 64``."""
    bits = np.asarray(bits, dtype=np.uint8)
    B, W = bits.shape
    nwords = max(1, -(-B // 64))
    padded = np.zeros((W, nwords * 64), dtype=np.uint8)
    padded[:, :B] = bits.T
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").astype(np.uint64)


def unpack_columns(words: np.ndarray, count: int) -> np.ndarray:
    """Inverse of :func:`pack_columns`: returns (count, W) uint8."""
    w = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(w, axis=1, bitorder="little")[:, :count]
    return bits.T


def simulate_packed(net: HardNetwork, packed: np.ndarray, *, all_layers: bool = False):
    """Evaluate the network on packed input lines ``(input_width, words)``.

    Returns the packed final-layer lines ``(last_width, words)``, or a list of
    every layer's lines when ``all_layers`` is set.
    """
    cfg = net.config
    h = np.asarray(packed, dtype=np.uint64)
    layers = []
    for wires, table in zip(net.wiring, net.tables):
        masks = np.where(table.astype(bool), _ALL, _ZERO)
        if cfg.neuron_kind == "gate":
            a, b = h[wires[:, 0]], h[wires[:, 1]]
            na, nb = ~a, ~b
            h = ((masks[:, 0:1] & na & nb) | (masks[:, 1:2] & na & b)
                 | (masks[:, 2:3] & a & nb) | (masks[:, 3:4] & a & b))
        else:
            v = np.broadcast_to(masks[:, :, None], masks.shape + h.shape[1:])
            for j in range(cfg.lut_inputs - 1, -1, -1):
                sel = h[wires[:, j]][:, None, :]
                v = (~sel & v[:, 0::2]) | (sel & v[:, 1::2])
            h = v[:, 0]
        layers.append(h)
    return layers if all_layers else h


def forward_hard(net: HardNetwork, bits):
    """Boolean inference.

    ``bits`` is one binary vector or a (B, input_width) batch. Returns
    ``(predicted_class, group_counts)``; ties go to the lowest class index.
    """
    cfg = net.config
    arr = np.asarray(bits)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != cfg.input_width:
        raise ValueError(
            f"input width {arr.shape[-1]} does not match network input width {cfg.input_width}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("forward_hard requires binary inputs")
    out = unpack_columns(simulate_packed(net, pack_columns(arr)), arr.shape[0])
    counts = out.reshape(len(arr), cfg.num_classes, cfg.group_size).sum(axis=2).astype(np.int64)
    pred = np.argmax(counts, axis=1)
    if single:
        return int(pred[0]), counts[0]
    return pred, counts


# Checkpoints: a zip archive with fixed timestamps so identical networks
# produce identical bytes.

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _zip_write(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _npy_bytes(a: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def checkpoint_bytes(net: SoftNetwork | HardNetwork) -> bytes:
    hard = isinstance(net, HardNetwork)
    meta = {
        "format": "gatenet-checkpoint",
        "version": CHECKPOINT_VERSION,
        "hard": hard,
        "config": net.config.to_dict(),
        "layers": len(net.wiring),
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _zip_write(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        arrays = net.tables if hard else net.params
        for k, (w, p) in enumerate(zip(net.wiring, arrays)):
            _zip_write(zf, f"wiring_{k}.npy", _npy_bytes(w.astype("<i8")))
            _zip_write(zf, f"{'table' if hard else 'param'}_{k}.npy",
                       _npy_bytes(p.astype("u1" if hard else "<f8")))
        if hard and net.gates is not None:
            for k, g in enumerate(net.gates):
                _zip_write(zf, f"gates_{k}.npy", _npy_bytes(g.astype("u1")))
    return buf.getvalue()


def save_checkpoint(net, path) -> None:
    from .io_utils import atomic_write_bytes
    atomic_write_bytes(path, checkpoint_bytes(net))


def load_checkpoint(path) -> SoftNetwork | HardNetwork:
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise ValueError(f"{path}: not a gatenet checkpoint ({exc})") from exc
    with zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != "gatenet-checkpoint":
            raise ValueError(f"{path}: not a gatenet checkpoint")
        if meta["version"] > CHECKPOINT_VERSION:
            raise ValueError(f"{path}: checkpoint version {meta['version']} is newer than supported")
        config = NetworkConfig.from_dict(meta["config"])

        def arr(name):
            return np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)

        n = meta["layers"]
        wiring = [arr(f"wiring_{k}.npy").astype(np.int64) for k in range(n)]
        if meta["hard"]:
            tables = [arr(f"table_{k}.npy") for k in range(n)]
            names = set(zf.namelist())
            gates = ([arr(f"gates_{k}.npy") for k in range(n)]
                     if f"gates_0.npy" in names else None)
            return HardNetwork(config, wiring, tables, gates)
        return SoftNetwork(config, wiring, [arr(f"param_{k}.npy") for k in range(n)])
