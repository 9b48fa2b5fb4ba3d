import itertools

import numpy as np
import pytest
from conftest import saturated, tree_network

from gatenet import logic, rate
from gatenet.network import (HardNetwork, NetworkConfig, discretize, forward_hard,
                             predict_soft, simulate_packed)


def and_net(num_outputs=1):
    cfg = NetworkConfig((num_outputs,), 2, 1)
    wiring = [np.tile([0, 1], (num_outputs, 1))]
    return HardNetwork(cfg, wiring, [logic.TRUTH_TABLES[[1] * num_outputs]],
                       [np.full(num_outputs, 1, np.uint8)])


def test_encode_examples():
    s = rate.encode_stream(np.array([0.0, 1.0, 0.5]), 10_000, seed=1)
    assert s.streams.shape == (3, 10_000)
    assert not s.streams[0].any() and s.streams[1].all()
    assert abs(s.streams[2].mean() - 0.5) < 0.02
    again = rate.encode_stream(np.array([0.0, 1.0, 0.5]), 10_000, seed=1)
    assert np.array_equal(s.streams, again.streams)


@pytest.mark.parametrize("bad", [np.array([1.2]), np.array([-0.1]), np.array([np.nan])])
def test_encode_rejects_bad_rates(bad):
    with pytest.raises(ValueError):
        rate.encode_stream(bad, 4, 0)


def test_encode_rejects_bad_length():
    with pytest.raises(ValueError):
        rate.encode_stream(np.array([0.5]), 0, 0)


def test_length_one_equals_forward_hard():
    cfg = NetworkConfig((24, 8), 6, 4, seed=2)
    hard = discretize(saturated(cfg))
    for bits in itertools.product((0, 1), repeat=6):
        batch = rate.encode_stream(np.array(bits, float), 1, seed=0)
        pred, sums = rate.infer_rate(hard, batch)
        hp, hc = forward_hard(hard, np.array(bits))
        assert pred == hp and np.array_equal(sums, hc)


def test_constant_true_group_wins():
    cfg = NetworkConfig((8,), 3, 4)
    tables = np.zeros((8, 4), np.uint8)
    tables[4:6] = 1  # group 2 all TRUE
    net = HardNetwork(cfg, [np.tile([0, 1], (8, 1))], [tables], None)
    for L in (1, 7, 300):
        batch = rate.encode_stream(np.random.default_rng(L).random(3), L, seed=L)
        assert rate.infer_rate(net, batch)[0] == 2


def test_and_gate_rate_converges():
    net = and_net()
    errs = []
    for L in (64, 1024, 16384):
        batch = rate.encode_stream(np.array([0.5, 0.5]), L, seed=3)
        c = rate.gate_counters(net, batch, counter_bits=None)[0]
        errs.append(abs(c / L - 0.25))
    assert errs[-1] < 0.01
    assert logic.gate_eval(1, 0.5, 0.5) == 0.25


def test_counter_saturation():
    net = and_net()
    batch = rate.encode_stream(np.array([1.0, 1.0]), 255, seed=0)
    assert rate.gate_counters(net, batch)[0] == 255
    batch = rate.encode_stream(np.array([1.0, 1.0]), 1000, seed=0)
    assert rate.gate_counters(net, batch)[0] == 255
    assert rate.gate_counters(net, batch, counter_bits=None)[0] == 1000
    assert rate.counter_bits_for(255) == 8 and rate.counter_bits_for(1024) == 11


@pytest.mark.parametrize("kind,n", [("gate", 2), ("lut", 2), ("lut", 3)])
def test_tree_network_rates_within_three_sigma(kind, n):
    # Each gate is an independent binomial check, so about 0.27% of gates
    # fall outside 3 sigma by chance; bound that fraction and forbid 5 sigma.
    L = 4096
    z = []
    for seed in range(30):
        net = tree_network(81 if n == 3 else 64, kind, n, seed)
        r = np.random.default_rng(seed).random(net.config.input_width)
        batch = rate.encode_stream(r, L, seed)
        packed, mask, words = rate._pack_streams(batch.streams[None])
        layers = simulate_packed(net, packed, all_layers=True)
        expected = rate.expected_outputs(net, r, all_layers=True)
        for got, p in zip(layers, expected):
            p = np.clip(p[0], 0.0, 1.0)
            empirical = np.bitwise_count(got & mask).sum(axis=1) / L
            sigma = np.sqrt(p * (1 - p) / L)
            fixed = sigma < 1e-12
            assert np.allclose(empirical[fixed], p[fixed])
            z.extend(np.abs(empirical - p)[~fixed] / sigma[~fixed])
    z = np.array(z)
    assert len(z) > 100
    assert np.mean(z > 3) <= 0.01
    assert z.max() < 5


def test_expected_outputs_match_soft_forward_on_saturated_net():
    cfg = NetworkConfig((20, 8), 6, 4, "lut", 3, seed=1)
    soft = saturated(cfg)
    hard = discretize(soft)
    x = np.random.default_rng(0).random((7, 6))
    from gatenet.network import forward_soft
    _, out = forward_soft(soft, x)
    assert np.allclose(rate.expected_outputs(hard, x), out, atol=1e-12)


def test_predict_rate_batches_and_limits():
    cfg = NetworkConfig((40,), 8, 4, seed=3)
    soft = saturated(cfg)
    hard = discretize(soft)
    x = np.random.default_rng(1).random((50, 8))
    pred, sums = rate.predict_rate(hard, x, 4096, seed=0, counter_bits=None)
    assert sums.shape == (50, 4) and sums.sum(axis=1).max() <= 40 * 4096
    agree = np.mean(pred == predict_soft(soft, x))
    assert agree > 0.8
    with pytest.raises(ValueError, match="width"):
        rate.predict_rate(hard, x[:, :5], 4, 0)


def test_degenerate_features_give_constant_predictions():
    hard = discretize(saturated(NetworkConfig((40,), 8, 4, seed=6)))
    x = np.zeros((5, 8))
    preds = {tuple(rate.predict_rate(hard, x, L, seed=L)[0]) for L in (1, 8, 64, 1024)}
    assert len(preds) == 1


def test_sweep_rows_and_csv():
    hard = discretize(saturated(NetworkConfig((40,), 8, 4, seed=6)))
    rng = np.random.default_rng(0)
    x = rng.random((30, 8))
    y = rng.integers(0, 4, 30)
    rows = rate.rate_sweep(hard, x, y, [1, 16], seeds=(0, 1))
    assert [r["seed"] for r in rows] == [0, 1, "mean", 0, 1, "mean"]
    mean = rows[2]
    assert mean["accuracy"] == pytest.approx((rows[0]["accuracy"] + rows[1]["accuracy"]) / 2)
    text = rate.sweep_csv(rows)
    assert text.splitlines()[0] == "L,accuracy,jk_index,seed"
    assert len(text.splitlines()) == 7


def test_sweep_is_reproducible():
    hard = discretize(saturated(NetworkConfig((40,), 8, 4, seed=6)))
    x = np.random.default_rng(0).random((20, 8))
    y = np.zeros(20, int)
    assert rate.rate_sweep(hard, x, y, [3], (5,)) == rate.rate_sweep(hard, x, y, [3], (5,))
