"""Assemble DS1/DS2 feature sets and write them to disk.

Binary feature file layout (all integers little-endian)::

    8 bytes   magic b"BEATBITS"
    uint32    format version (1)
    uint32    row count R
    uint32    bits per row (138)
    R rows    ceil(138 / 8) = 18 bytes each; bit j of a row is bit (j % 8)
              of byte j // 8 (least significant bit first)
    R bytes   class index per row (0=N, 1=S, 2=V, 3=F)
    R uint16  record id per row
    R uint32  R-peak sample index per row

The real variant is a CSV with the 89 feature names, then ``label``,
``record`` and ``sample`` columns.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..io_utils import atomic_write_bytes, atomic_write_text
from ..metrics import CLASSES
from . import aami
from .features import BINARY_WIDTH, REAL_FIELDS, REAL_WIDTH, binary_from_real, record_features
from .wfdb_io import EcgRecord, locate_record, read_record

MAGIC = b"BEATBITS"
FILE_VERSION = 1
REPORT_CLASSES = ("N", "S", "V", "F", "Q")


class MissingRecordsError(FileNotFoundError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing records: " + ", ".join(map(str, self.missing)))


@dataclass
class FeatureSet:
    binary: np.ndarray   # (n, 138) uint8
    real: np.ndarray     # (n, 89) float64
    labels: np.ndarray   # (n,) int64 class indices into CLASSES
    records: np.ndarray  # (n,) int64
    samples: np.ndarray  # (n,) int64

    def __len__(self):
        return len(self.labels)

    @classmethod
    def empty(cls) -> "FeatureSet":
        return cls(np.zeros((0, BINARY_WIDTH), np.uint8), np.zeros((0, REAL_WIDTH)),
                   np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))


def _class_counts(symbols) -> dict[str, int]:
    counts = dict.fromkeys(REPORT_CLASSES, 0)
    for sym in symbols:
        c = aami.map_aami(sym)
        if c in counts:
            counts[c] += 1
    return counts


@dataclass
class CountReport:
    annotated: dict[str, dict[str, int]]  # split -> class -> count
    emitted: dict[str, dict[str, int]]
    per_record: dict[int, dict[str, tuple[int, int]]]  # record -> class -> (annotated, emitted)

    def totals(self, which: str = "emitted") -> dict[str, int]:
        src = getattr(self, which)
        return {c: sum(src[s][c] for s in src) for c in REPORT_CLASSES}

    def deviations(self, which: str = "emitted") -> dict[str, float]:
        """Relative deviation of DS1+DS2 totals from the published counts."""
        tot = self.totals(which)
        return {c: (tot[c] - sum(aami.REFERENCE_COUNTS[c])) / sum(aami.REFERENCE_COUNTS[c])
                for c in REPORT_CLASSES}

    def table(self) -> str:
        lines = ["class  DS1 ann  DS1 emit  DS2 ann  DS2 emit   total  reference  dev(emit)"]
        dev = self.deviations()
        tot = self.totals()
        for c in REPORT_CLASSES:
            ref = aami.REFERENCE_COUNTS[c]
            lines.append(
                f"{c:<5} {self.annotated['DS1'][c]:8d} {self.emitted['DS1'][c]:9d} "
                f"{self.annotated['DS2'][c]:8d} {self.emitted['DS2'][c]:9d} "
                f"{tot[c]:7d} {sum(ref):10d} {dev[c]:+9.2%}")
        lines.append("Q beats are counted but not emitted to the feature files.")
        return "\n".join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["record", "class", "annotated", "emitted"])
        for rid in sorted(self.per_record):
            for c in REPORT_CLASSES:
                a, e = self.per_record[rid][c]
                w.writerow([rid, c, a, e])
        return buf.getvalue()


def features_for_record(record: EcgRecord) -> tuple[FeatureSet, dict[str, tuple[int, int]]]:
    all_feats = record_features(record)
    emitted_all = _class_counts_from_labels(f.label for f in all_feats)
    feats = [f for f in all_feats if f.label in CLASSES]
    annotated = _class_counts(record.ann_symbols)
    per_class = {c: (annotated[c], emitted_all[c]) for c in REPORT_CLASSES}
    if not feats:
        return FeatureSet.empty(), per_class
    fs = FeatureSet(
        np.stack([f.binary for f in feats]),
        np.stack([f.real for f in feats]),
        np.array([CLASSES.index(f.label) for f in feats], dtype=np.int64),
        np.full(len(feats), record.record_id, dtype=np.int64),
        np.array([f.sample for f in feats], dtype=np.int64),
    )
    return fs, per_class


def _class_counts_from_labels(labels) -> dict[str, int]:
    counts = dict.fromkeys(REPORT_CLASSES, 0)
    for lab in labels:
        if lab in counts:
            counts[lab] += 1
    return counts


def concat(sets: list[FeatureSet]) -> FeatureSet:
    sets = [s for s in sets if len(s)]
    if not sets:
        return FeatureSet.empty()
    return FeatureSet(*(np.concatenate([getattr(s, f) for s in sets])
                        for f in ("binary", "real", "labels", "records", "samples")))


def load_records(directory, ids, fmt: str = "wfdb") -> dict[int, EcgRecord]:
    """Read the listed records, raising :class:`MissingRecordsError` that
    names every absent id."""
    located = {rid: locate_record(directory, rid, fmt) for rid in ids}
    missing = [rid for rid, pair in located.items() if pair is None]
    if missing:
        raise MissingRecordsError(missing)
    return {rid: read_record(*pair, record_id=rid) for rid, pair in located.items()}


def build_dataset(records, split=None) -> tuple[dict[str, FeatureSet], CountReport]:
    """Feature sets for both halves of the split.

    ``records`` maps record id to :class:`EcgRecord` (or is a directory of
    WFDB files). Q-class beats are counted but dropped.
    """
    ds1, ds2 = split if split is not None else aami.split_inter_patient()
    if not isinstance(records, dict):
        records = load_records(records, [*ds1, *ds2])
    missing = [rid for rid in (*ds1, *ds2) if rid not in records]
    if missing:
        raise MissingRecordsError(missing)
    out, annotated, emitted, per_record = {}, {}, {}, {}
    for name, ids in (("DS1", ds1), ("DS2", ds2)):
        parts = []
        annotated[name] = dict.fromkeys(REPORT_CLASSES, 0)
        emitted[name] = dict.fromkeys(REPORT_CLASSES, 0)
        for rid in ids:
            fs, counts = features_for_record(records[rid])
            parts.append(fs)
            per_record[rid] = counts
            for c, (a, e) in counts.items():
                annotated[name][c] += a
                emitted[name][c] += e
        out[name] = concat(parts)
    return out, CountReport(annotated, emitted, per_record)


def binary_file_bytes(fs: FeatureSet) -> bytes:
    n = len(fs)
    rows = np.packbits(fs.binary.astype(np.uint8), axis=1, bitorder="little")
    return b"".join([
        MAGIC,
        struct.pack("<III", FILE_VERSION, n, fs.binary.shape[1] if n else BINARY_WIDTH),
        rows.tobytes(),
        fs.labels.astype(np.uint8).tobytes(),
        fs.records.astype("<u2").tobytes(),
        fs.samples.astype("<u4").tobytes(),
    ])


def write_binary_features(path, fs: FeatureSet) -> None:
    atomic_write_bytes(path, binary_file_bytes(fs))


def read_binary_features(path) -> FeatureSet:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a binary feature file")
    version, n, width = struct.unpack_from("<III", raw, 8)
    if version != FILE_VERSION:
        raise ValueError(f"{path}: unsupported feature file version {version}")
    row_bytes = -(-width // 8)
    pos = 20
    need = pos + n * (row_bytes + 1 + 2 + 4)
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(raw)}")
    rows = np.frombuffer(raw, np.uint8, n * row_bytes, pos).reshape(n, row_bytes)
    binary = np.unpackbits(rows, axis=1, bitorder="little")[:, :width]
    pos += n * row_bytes
    labels = np.frombuffer(raw, np.uint8, n, pos).astype(np.int64)
    pos += n
    records = np.frombuffer(raw, "<u2", n, pos).astype(np.int64)
    pos += 2 * n
    samples = np.frombuffer(raw, "<u4", n, pos).astype(np.int64)
    return FeatureSet(binary, np.zeros((n, REAL_WIDTH)), labels, records, samples)


def real_csv_text(fs: FeatureSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*REAL_FIELDS, "label", "record", "sample"])
    for row, lab, rid, smp in zip(fs.real, fs.labels, fs.records, fs.samples):
        w.writerow([*(repr(float(v)) for v in row), CLASSES[lab], int(rid), int(smp)])
    return buf.getvalue()


def write_real_features(path, fs: FeatureSet) -> None:
    atomic_write_text(path, real_csv_text(fs))


def read_real_features(path) -> FeatureSet:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:REAL_WIDTH] != list(REAL_FIELDS) or header[REAL_WIDTH:] != ["label", "record", "sample"]:
            raise ValueError(f"{path}: unexpected real-feature header")
        rows = list(reader)
    n = len(rows)
    real = np.array([[float(v) for v in r[:REAL_WIDTH]] for r in rows]).reshape(n, REAL_WIDTH)
    labels = np.array([CLASSES.index(r[REAL_WIDTH]) for r in rows], dtype=np.int64)
    records = np.array([int(r[REAL_WIDTH + 1]) for r in rows], dtype=np.int64)
    samples = np.array([int(r[REAL_WIDTH + 2]) for r in rows], dtype=np.int64)
    binary = (np.stack([binary_from_real(r) for r in real]) if n
              else np.zeros((0, BINARY_WIDTH), np.uint8))
    return FeatureSet(binary, real, labels, records, samples)
