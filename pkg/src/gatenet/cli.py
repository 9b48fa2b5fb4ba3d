"""``gatenet`` command line: features, train, eval, sweep, cost, export.

Exit status is 0 on success, 1 for invalid arguments or configuration and
2 for missing or malformed data. Every command writes a
``manifest_<command>.json`` beside its outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import cost as cost_mod
from . import metrics, rate
from .config import RunConfig, load_run_config, parse_idx_spec
from .ecg import aami
from .ecg.dataset import (MissingRecordsError, build_dataset, load_records,
                          read_binary_features, read_real_features,
                          write_binary_features, write_real_features)
from .ecg.wfdb_io import WfdbParseError
from .idx import IdxParseError, find_mnist, read_idx
from .io_utils import atomic_write_text, write_manifest
from .netlist import emit_netlist
from .network import (ConfigError, HardNetwork, NetworkConfig, SoftNetwork, TrainingError,
                      build_network, discretize, forward_hard, load_checkpoint,
                      predict_soft, save_checkpoint, train)

EXIT_OK, EXIT_INVALID, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    """Input data is missing, unreadable or inconsistent with the model."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# Data loading.

def load_data(spec: str, encoding: str = "binary") -> tuple[np.ndarray, np.ndarray, int]:
    """Features, labels and class count from a data spec.

    ``*.bin`` is an ECG binary feature file, ``*.csv`` an ECG real feature
    file (its binary view is rebuilt from the reals) and ``idx:DIR:split``
    an MNIST-style IDX pair. ``encoding`` selects the 0/1 or the [0, 1]
    variant where both exist.
    """
    try:
        if spec.startswith("idx:"):
            d, split = parse_idx_spec(spec)
            images, labels = find_mnist(d, split)
            x, y = read_idx(images, labels, "threshold" if encoding == "binary" else "rate")
            return x, y, 10
        path = Path(spec)
        if path.suffix == ".bin":
            if encoding == "rate":
                raise ConfigError(f"{spec}: binary feature files have no rate variant; "
                                  "use the real-valued CSV")
            fs = read_binary_features(path)
            return fs.binary.astype(np.float64), fs.labels, len(metrics.CLASSES)
        if path.suffix == ".csv":
            fs = read_real_features(path)
            x = fs.binary.astype(np.float64) if encoding == "binary" else fs.real
            return x, fs.labels, len(metrics.CLASSES)
    except (OSError, IdxParseError, UnicodeDecodeError) as exc:
        raise DataError(str(exc)) from exc
    except ConfigError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise DataError(f"{spec}: {exc}") from exc
    raise ConfigError(f"unrecognised data spec {spec!r} (expected .bin, .csv or idx:DIR:split)")


def _heldout_split(n: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    # Fixed permutation so every seed sees the same held-out rows.
    order = np.random.default_rng(0).permutation(n)
    size = min(size, n // 5)
    return np.sort(order[size:]), np.sort(order[:size])


# Commands.

def cmd_features(args) -> int:
    out = Path(args.out_dir)
    try:
        ds1, ds2 = aami.split_inter_patient()
        records = load_records(args.records_dir, [*ds1, *ds2], args.format)
        sets, report = build_dataset(records, (ds1, ds2))
    except MissingRecordsError as exc:
        raise DataError(f"{args.records_dir}: {len(exc.missing)} of 44 records missing: "
                        + " ".join(map(str, exc.missing))) from exc
    except (WfdbParseError, OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    for name, fs in sets.items():
        write_binary_features(out / f"{name.lower()}.bin", fs)
        write_real_features(out / f"{name.lower()}.csv", fs)
        _say(f"{name}: {len(fs)} beats")
    atomic_write_text(out / "counts.csv", report.csv())
    table = report.table()
    atomic_write_text(out / "counts.txt", table + "\n")
    print(table)
    write_manifest(out, "features", {"records_dir": str(Path(args.records_dir).resolve()),
                                     "format": args.format}, [])
    return EXIT_OK


def _log_csv(history: list[dict]) -> str:
    keys = ["epoch", "train_loss", "heldout_loss", "heldout_accuracy"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for h in history:
        w.writerow([h["epoch"], *(f"{h[k]:.6f}" if k in h else "" for k in keys[1:])])
    return buf.getvalue()


def run_training(cfg: RunConfig) -> list[dict]:
    """Train one network per seed; returns a summary row per seed."""
    from .plotting import plot_confusion, plot_training

    x, y, n_classes = load_data(cfg.train_data, cfg.encoding)
    test = load_data(cfg.test_data, cfg.encoding) if cfg.test_data else None
    if test is not None and test[0].shape[1] != x.shape[1]:
        raise DataError(f"test width {test[0].shape[1]} differs from train width {x.shape[1]}")
    # Validate the full network shape before any training starts.
    cfg.network_config(cfg.seeds[0], x.shape[1], n_classes)
    fit_idx, held_idx = _heldout_split(len(x), cfg.heldout_size)
    heldout = (x[held_idx], y[held_idx]) if len(held_idx) else None
    x_fit, y_fit = x[fit_idx], y[fit_idx]
    out = Path(cfg.output_dir)
    summary = []
    for seed in cfg.seeds:
        ncfg = cfg.network_config(seed, x.shape[1], n_classes)
        run_dir = out / f"seed{seed}"
        history: list[dict] = []

        def beat(stats, seed=seed):
            extra = (f" heldout_acc={stats['heldout_accuracy']:.4f}"
                     if "heldout_accuracy" in stats else "")
            _say(f"[train seed={seed}] epoch {stats['epoch']}/{ncfg.epochs} "
                 f"loss={stats['train_loss']:.5f}{extra}")

        net = train(build_network(ncfg), x_fit, y_fit, heldout=heldout,
                    history=history, on_epoch=beat, record_initial=True)
        save_checkpoint(net, run_dir / "checkpoint.gnz")
        atomic_write_text(run_dir / "train_log.csv", _log_csv(history))
        plot_training(history, run_dir / "loss.png", title=f"seed {seed}")
        row = {"seed": seed, "final_train_loss": history[-1]["train_loss"]}
        if test is not None:
            tx, ty, _ = test
            hard = discretize(net)
            C_soft = metrics.confusion(predict_soft(net, tx), ty, n_classes)
            C_hard = metrics.confusion(_hard_predict(hard, tx), ty, n_classes)
            atomic_write_text(run_dir / "test_metrics_hard.csv", metrics.report_csv(C_hard))
            atomic_write_text(run_dir / "test_confusion_hard.csv", metrics.confusion_csv(C_hard))
            plot_confusion(C_hard, run_dir / "test_confusion_hard.png")
            row.update({
                "soft_accuracy": metrics.accuracy(C_soft),
                "hard_accuracy": metrics.accuracy(C_hard),
                "hard_jk_index": (metrics.jk_index(C_hard)
                                  if n_classes == len(metrics.CLASSES) else float("nan")),
            })
            _say(f"[train seed={seed}] test hard accuracy {row['hard_accuracy']:.4f}")
        summary.append(row)
    keys = list(summary[0])
    lines = [",".join(keys)]
    for r in summary:
        lines.append(",".join(f"{r[k]:.6f}" if isinstance(r[k], float) else str(r[k])
                              for k in keys))
    atomic_write_text(out / "summary.csv", "\n".join(lines) + "\n")
    write_manifest(out, "train", cfg.to_dict(), cfg.seeds)
    return summary


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, args.set)
    try:
        run_training(cfg)
    except TrainingError as exc:
        _say(f"training diverged: {exc}")
        return EXIT_INVALID
    return EXIT_OK


def _load_net(path) -> SoftNetwork | HardNetwork:
    try:
        return load_checkpoint(path)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from exc


def _hard_predict(net: HardNetwork, x: np.ndarray) -> np.ndarray:
    # Real-valued inputs are read as bits by thresholding at 0.5.
    bits = (x >= 0.5).astype(np.uint8)
    return forward_hard(net, bits)[0] if len(bits) else np.zeros(0, np.int64)


def _infer_encoding(spec: str, net_cfg: NetworkConfig) -> str:
    if spec.endswith(".csv"):
        from .ecg.features import REAL_WIDTH
        return "rate" if net_cfg.input_width == REAL_WIDTH else "binary"
    return "binary"


def _check_width(net_cfg: NetworkConfig, x: np.ndarray, spec: str) -> None:
    if x.shape[1] != net_cfg.input_width:
        raise DataError(f"{spec}: feature width {x.shape[1]} does not match the network "
                        f"input width {net_cfg.input_width}")


def cmd_eval(args) -> int:
    from .plotting import plot_confusion

    net = _load_net(args.checkpoint)
    encoding = args.encoding or _infer_encoding(args.features, net.config)
    x, y, n_classes = load_data(args.features, encoding)
    _check_width(net.config, x, args.features)
    if n_classes != net.config.num_classes:
        raise DataError(f"{args.features} has {n_classes} classes, network has "
                        f"{net.config.num_classes}")
    if args.soft:
        if not isinstance(net, SoftNetwork):
            raise ConfigError("--soft needs a trained (soft) checkpoint")
        mode, pred = "soft", predict_soft(net, x)
    else:
        hard = discretize(net) if isinstance(net, SoftNetwork) else net
        if args.rate is not None:
            if args.rate < 1:
                raise ConfigError("--rate needs a stream length >= 1")
            bits = args.counter_bits or rate.counter_bits_for(args.rate)
            mode = f"rate{args.rate}"
            pred, _ = rate.predict_rate(hard, x, args.rate, args.seed, bits)
        else:
            mode, pred = "hard", _hard_predict(hard, x)
    C = metrics.confusion(pred, y, n_classes)
    out = Path(args.out)
    atomic_write_text(out / f"metrics_{mode}.csv", metrics.report_csv(C))
    atomic_write_text(out / f"confusion_{mode}.csv", metrics.confusion_csv(C))
    table = metrics.report_table(C)
    atomic_write_text(out / f"report_{mode}.txt", table + "\n")
    plot_confusion(C, out / f"confusion_{mode}.png")
    print(table)
    write_manifest(out, "eval", {
        "checkpoint": str(Path(args.checkpoint).resolve()), "features": args.features,
        "mode": mode, "encoding": encoding, "counter_bits": args.counter_bits,
        "network": net.config.to_dict()}, [args.seed] if args.rate else [])
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep

    net = _load_net(args.checkpoint)
    if any(L < 1 for L in args.lengths):
        raise ConfigError("stream lengths must be >= 1")
    encoding = args.encoding or _infer_encoding(args.features, net.config)
    x, y, n_classes = load_data(args.features, encoding)
    _check_width(net.config, x, args.features)
    hard = discretize(net) if isinstance(net, SoftNetwork) else net
    rows = rate.rate_sweep(hard, x, y, args.lengths, args.seeds, args.counter_bits)
    reference = None
    if isinstance(net, SoftNetwork):
        reference = float(np.mean(predict_soft(net, x) == y)) if len(y) else float("nan")
    out = Path(args.out)
    atomic_write_text(out / "sweep.csv", rate.sweep_csv(rows))
    plot_sweep(rows, out / "sweep.png", reference)
    for r in rows:
        if r["seed"] == "mean":
            print(f"L={r['L']:>6}  accuracy={r['accuracy']:.4f}  jk={r['jk_index']:.4f}")
    if reference is not None:
        print(f"real-valued soft accuracy {reference:.4f}")
    write_manifest(out, "sweep", {
        "checkpoint": str(Path(args.checkpoint).resolve()), "features": args.features,
        "lengths": args.lengths, "counter_bits": args.counter_bits, "encoding": encoding,
        "network": net.config.to_dict()}, args.seeds,
        {"soft_accuracy": reference})
    return EXIT_OK


# Network column and readout column of the published cost table.
PUBLISHED_COSTS = (
    ("LGN 1x8k", "gate", 2, (8000,), 80, 560),
    ("2-LUTN 1x8k", "lut", 2, (8000,), 720, 560),
    ("4-LUTN 1x3k", "lut", 4, (3000,), 1350, 211),
    ("6-LUTN 1x2k", "lut", 6, (2000,), 3780, 139),
)


def published_cost_csv(num_classes: int = 4, preproc: float = cost_mod.PREPROC_FLOPS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# our readout: popcount by column compression, full adder=5 gates, "
                "half adder=2 gates; 1 FLOP = 100 gates"])
    w.writerow(["model", "flops_network", "flops_readout", "flops_preproc", "flops_total",
                "published_flops_network", "published_flops_readout"])
    for name, kind, n, layers, pub_net, pub_ro in PUBLISHED_COSTS:
        ncfg = NetworkConfig(layers, 1, num_classes, kind, n)
        r = cost_mod.cost_report(ncfg, preproc)
        w.writerow([name, f"{r.flops_network:g}", f"{r.flops_readout:g}",
                    f"{r.flops_preproc:g}", f"{r.flops_total:g}", pub_net, pub_ro])
    return buf.getvalue()


def cmd_cost(args) -> int:
    out = Path(args.out)
    if args.checkpoint:
        net = _load_net(args.checkpoint)
        report = cost_mod.cost_report(net.config, args.preproc_flops)
        atomic_write_text(out / "cost.csv", report.csv())
        table = report.table()
        config = {"checkpoint": str(Path(args.checkpoint).resolve()),
                  "network": net.config.to_dict()}
    else:
        text = published_cost_csv(args.classes, args.preproc_flops)
        atomic_write_text(out / "cost.csv", text)
        rows = list(csv.reader(io.StringIO(text)))[1:]
        table = "\n".join([rows[0][0].ljust(12) + "".join(h.rjust(13) for h in
                                                          ("net", "readout", "preproc", "total",
                                                           "pub. net", "pub. readout"))]
                          + [r[0].ljust(12) + "".join(v.rjust(13) for v in r[1:])
                             for r in rows[1:]])
        table = ("readout convention: popcount by column compression, full adder = 5 gates, "
                 "half adder = 2 gates\n" + table)
        config = {"classes": args.classes}
    config["preproc_flops"] = args.preproc_flops
    atomic_write_text(out / "cost.txt", table + "\n")
    print(table)
    write_manifest(out, "cost", config, [])
    return EXIT_OK


def cmd_export(args) -> int:
    net = _load_net(args.checkpoint)
    hard = discretize(net) if isinstance(net, SoftNetwork) else net
    out = Path(args.out)
    atomic_write_text(out, emit_netlist(hard, args.module))
    _say(f"wrote {out}")
    write_manifest(out.parent, "export", {
        "checkpoint": str(Path(args.checkpoint).resolve()), "module": args.module,
        "output": out.name, "network": net.config.to_dict()}, [])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gatenet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("features", help="extract DS1/DS2 beat features from MIT-BIH records")
    f.add_argument("records_dir")
    f.add_argument("out_dir")
    f.add_argument("--format", choices=("wfdb", "csv"), default="wfdb")
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", help="train one network per seed from a config file")
    t.add_argument("config")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value (repeatable)")
    t.set_defaults(func=cmd_train)

    def data_args(sp):
        sp.add_argument("checkpoint")
        sp.add_argument("features", help="*.bin, *.csv or idx:DIR:train|test")
        sp.add_argument("--encoding", choices=("binary", "rate"),
                        help="feature variant (default: inferred from the network width)")
        sp.add_argument("--counter-bits", type=int, default=None,
                        help="saturating counter width (default: wide enough for L)")
        sp.add_argument("--out", default=".", help="output directory")

    e = sub.add_parser("eval", help="metrics report for a checkpoint")
    data_args(e)
    mode = e.add_mutually_exclusive_group()
    mode.add_argument("--hard", action="store_true", help="discretized inference (default)")
    mode.add_argument("--soft", action="store_true", help="real-valued inference")
    mode.add_argument("--rate", type=int, metavar="L", help="rate-coded inference, L steps")
    e.add_argument("--seed", type=int, default=0, help="stream seed for --rate")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="accuracy against rate-coded stream length")
    data_args(s)
    s.add_argument("--lengths", type=_int_list,
                   default=[1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])
    s.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cost", help="FLOP and gate-count report")
    c.add_argument("--checkpoint", help="report this network (default: published models)")
    c.add_argument("--classes", type=int, default=4)
    c.add_argument("--preproc-flops", type=float, default=float(cost_mod.PREPROC_FLOPS))
    c.add_argument("--out", default=".")
    c.set_defaults(func=cmd_cost)

    x = sub.add_parser("export", help="write a structural Verilog netlist")
    x.add_argument("checkpoint")
    x.add_argument("out", help="output .v file")
    x.add_argument("--module", default="gatenet_top")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        _say(f"data error: {exc}")
        return EXIT_DATA
    except ConfigError as exc:
        _say(f"invalid configuration: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
