import sys

import numpy as np
import pytest

from gatenet import logic
from gatenet.ecg.wfdb_io import EcgRecord
from gatenet.network import HardNetwork, NetworkConfig, SoftNetwork, build_network


def saturated(config: NetworkConfig, seed: int = 0, scale: float = 60.0) -> SoftNetwork:
    """Soft network whose gates (or LUT entries) are effectively binary."""
    net = build_network(config)
    rng = np.random.default_rng(seed + 1000)
    params = []
    for p in net.params:
        if config.neuron_kind == "gate":
            z = np.full_like(p, -scale)
            z[np.arange(len(p)), rng.integers(0, 16, len(p))] = scale
        else:
            z = rng.integers(0, 2, p.shape).astype(float)
        params.append(z)
    return SoftNetwork(config, net.wiring, params)


def tree_network(n_inputs: int = 8, kind: str = "gate", lut_inputs: int = 2, seed: int = 0,
                 num_classes: int = 1) -> HardNetwork:
    """Random tree-shaped hard network: every line feeds exactly one neuron."""
    rng = np.random.default_rng(seed)
    fan = 2 if kind == "gate" else lut_inputs
    sizes, w = [], n_inputs
    while w % fan == 0 and w // fan >= num_classes:
        w //= fan
        sizes.append(w)
    cfg = NetworkConfig(tuple(sizes), n_inputs, num_classes, kind, lut_inputs)
    wiring, tables, gates = [], [], []
    width = n_inputs
    for size in sizes:
        wiring.append(rng.permutation(width).reshape(size, fan))
        if kind == "gate":
            g = rng.integers(0, 16, size).astype(np.uint8)
            gates.append(g)
            tables.append(logic.TRUTH_TABLES[g])
        else:
            tables.append(rng.integers(0, 2, (size, 2**fan)).astype(np.uint8))
        width = size
    return HardNetwork(cfg, wiring, tables, gates if kind == "gate" else None)


def synthetic_record(record_id: int = 100, n_beats: int = 40, rr: int = 300, seed: int = 0,
                     jitter: int = 0, symbols=None) -> EcgRecord:
    """Spiky beat train with one annotation per R-peak."""
    rng = np.random.default_rng(seed)
    gaps = rr + (rng.integers(-jitter, jitter + 1, n_beats) if jitter else np.zeros(n_beats, int))
    peaks = 450 + np.concatenate([[0], np.cumsum(gaps[:-1])])
    n = int(peaks[-1] + 450)
    t = np.arange(n)
    sig = 1024 + rng.normal(0, 4, n)
    for p in peaks:
        sig += 600 * np.exp(-0.5 * ((t - p) / 4.0) ** 2) - 80 * np.exp(-0.5 * ((t - p - 40) / 12.0) ** 2)
    symbols = list(symbols) if symbols is not None else ["N"] * n_beats
    return EcgRecord(record_id, np.clip(np.round(sig), -2048, 2047).astype(np.int64),
                     peaks.astype(np.int64), symbols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
