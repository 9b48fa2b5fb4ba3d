"""Readers and writers for the WFDB files the MIT-BIH database ships.

Only what the arrhythmia records use is supported: a ``.hea`` header,
format-212 signal files and MIT-format binary annotation files. A plain CSV
pair (``sample_index,value`` and ``sample_index,symbol``) is accepted as a
fallback and round-trips exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLE_RATE = 360

# MIT annotation codes -> mnemonic symbols (ecgcodes.h).
ANN_SYMBOLS = {
    1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A", 9: "S",
    10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|", 18: "s", 19: "T",
    20: "*", 21: "D", 22: '"', 23: "=", 24: "p", 25: "B", 26: "^", 27: "t",
    28: "+", 29: "u", 30: "?", 31: "!", 32: "[", 33: "]", 34: "e", 35: "n",
    36: "@", 37: "x", 38: "f", 39: "(", 40: ")", 41: "r",
}
ANN_CODES = {s: c for c, s in ANN_SYMBOLS.items()}

_SKIP, _NUM, _SUB, _CHAN, _AUX = 59, 60, 61, 62, 63


class WfdbParseError(ValueError):
    """Malformed record data. ``offset`` is the byte offset of the problem
    when it is known."""

    def __init__(self, message: str, path=None, offset: int | None = None):
        where = f"{path}: " if path else ""
        at = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"{where}{message}{at}")
        self.path = path
        self.offset = offset


@dataclass
class EcgRecord:
    record_id: int
    samples: np.ndarray
    ann_samples: np.ndarray
    ann_symbols: list[str]
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int64)
        self.ann_samples = np.asarray(self.ann_samples, dtype=np.int64)
        if len(self.ann_samples) != len(self.ann_symbols):
            raise ValueError("annotation samples and symbols differ in length")
        if len(self.ann_samples) and np.any(np.diff(self.ann_samples) < 0):
            raise ValueError(f"record {self.record_id}: annotations out of order")
        if len(self.ann_samples) and (self.ann_samples[0] < 0
                                      or self.ann_samples[-1] >= len(self.samples)):
            raise ValueError(f"record {self.record_id}: annotation outside signal bounds")

    @property
    def annotations(self) -> list[tuple[int, str]]:
        return list(zip(self.ann_samples.tolist(), self.ann_symbols))

    def __eq__(self, other):
        if not isinstance(other, EcgRecord):
            return NotImplemented
        return (self.record_id == other.record_id
                and self.sample_rate == other.sample_rate
                and np.array_equal(self.samples, other.samples)
                and np.array_equal(self.ann_samples, other.ann_samples)
                and self.ann_symbols == other.ann_symbols)


@dataclass
class SignalSpec:
    file_name: str
    fmt: str
    adc_gain: str = ""
    adc_res: int = 0
    adc_zero: int = 0
    init_value: int = 0
    checksum: int = 0
    block_size: int = 0
    description: str = ""


@dataclass
class Header:
    record_name: str
    n_signals: int
    fs: float
    n_samples: int | None
    signals: list[SignalSpec] = field(default_factory=list)


def read_header(path) -> Header:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise WfdbParseError("empty header", path)
    head = lines[0].split()
    try:
        name = head[0]
        nsig = int(head[1])
        fs = float(head[2].split("/")[0]) if len(head) > 2 else 250.0
        nsamp = int(head[3]) if len(head) > 3 else None
    except (IndexError, ValueError) as exc:
        raise WfdbParseError(f"bad record line {lines[0]!r}", path) from exc
    if len(lines) < 1 + nsig:
        raise WfdbParseError(f"header lists {nsig} signals but has {len(lines) - 1} signal lines", path)
    signals = []
    for ln in lines[1:1 + nsig]:
        parts = ln.split(maxsplit=8)
        if len(parts) < 2:
            raise WfdbParseError(f"bad signal line {ln!r}", path)
        fmt = parts[1].split("x")[0].split(":")[0].split("+")[0]

        def num(i, default=0):
            return int(parts[i]) if len(parts) > i else default

        try:
            signals.append(SignalSpec(parts[0], fmt, parts[2] if len(parts) > 2 else "",
                                      num(3), num(4), num(5), num(6), num(7),
                                      parts[8] if len(parts) > 8 else ""))
        except ValueError as exc:
            raise WfdbParseError(f"bad signal line {ln!r}", path) from exc
    return Header(name, nsig, fs, nsamp, signals)


def decode_212(raw: bytes, n_values: int, path=None) -> np.ndarray:
    """Decode ``n_values`` 12-bit two's-complement samples packed two per
    three bytes."""
    need = (3 * n_values + 1) // 2
    if len(raw) < need:
        raise WfdbParseError(
            f"signal file truncated: need {need} bytes for {n_values} samples, "
            f"have {len(raw)}", path, offset=len(raw))
    n_pairs = -(-n_values // 2)
    buf = np.zeros(3 * n_pairs, dtype=np.uint8)
    buf[:min(len(raw), 3 * n_pairs)] = np.frombuffer(raw[:3 * n_pairs], dtype=np.uint8)
    b = buf.reshape(-1, 3).astype(np.int64)
    first = b[:, 0] | ((b[:, 1] & 0x0F) << 8)
    second = b[:, 2] | ((b[:, 1] & 0xF0) << 4)
    out = np.empty(2 * n_pairs, dtype=np.int64)
    out[0::2], out[1::2] = first, second
    out = out[:n_values]
    out[out >= 2048] -= 4096
    return out


def encode_212(values) -> bytes:
    v = np.asarray(values, dtype=np.int64)
    if np.any(v < -2048) or np.any(v > 2047):
        raise ValueError("format 212 holds values in [-2048, 2047]")
    v = v & 0xFFF
    if len(v) % 2:
        v = np.append(v, 0)
    first, second = v[0::2], v[1::2]
    out = np.empty((len(first), 3), dtype=np.uint8)
    out[:, 0] = first & 0xFF
    out[:, 1] = ((first >> 8) & 0x0F) | (((second >> 8) & 0x0F) << 4)
    out[:, 2] = second & 0xFF
    return out.tobytes()


def read_signal_212(header_path) -> np.ndarray:
    """First channel of a format-212 record, as raw ADC integers."""
    header_path = Path(header_path)
    hdr = read_header(header_path)
    if not hdr.signals:
        raise WfdbParseError("header declares no signals", header_path)
    sig = hdr.signals[0]
    if sig.fmt != "212":
        raise WfdbParseError(f"unsupported signal format {sig.fmt!r}", header_path)
    if any(s.file_name != sig.file_name or s.fmt != "212" for s in hdr.signals):
        raise WfdbParseError("signals split across files are not supported", header_path)
    dat = header_path.parent / sig.file_name
    raw = dat.read_bytes()
    nsig = hdr.n_signals
    if hdr.n_samples is None:
        n_values = (len(raw) * 2) // 3
        n_values -= n_values % nsig
    else:
        n_values = hdr.n_samples * nsig
    values = decode_212(raw, n_values, dat)
    return values[0::nsig]


def read_annotations(path) -> tuple[np.ndarray, list[str]]:
    """Parse an MIT-format annotation file into sample indices and symbols.

    Codes without a standard mnemonic come back as their decimal code in
    square brackets, e.g. ``"[42]"``.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % 2:
        raise WfdbParseError("annotation file has an odd number of bytes", path, len(raw) - 1)
    samples, symbols = [], []
    t = 0
    pos = 0
    n = len(raw)

    def word(p):
        if p + 2 > n:
            raise WfdbParseError("annotation file truncated", path, p)
        return raw[p] | (raw[p + 1] << 8)

    while pos < n:
        w = word(pos)
        code, val = w >> 10, w & 0x3FF
        if code == 0 and val == 0:
            break
        if code == _SKIP:
            if pos + 6 > n:
                raise WfdbParseError("SKIP record truncated", path, pos)
            hi, lo = word(pos + 2), word(pos + 4)
            delta = (hi << 16) | lo
            if delta >= 1 << 31:
                delta -= 1 << 32
            t += delta
            pos += 6
            continue
        if code == _AUX:
            pos += 2 + val + (val & 1)
            if pos > n:
                raise WfdbParseError("AUX field truncated", path, n)
            continue
        if code in (_NUM, _SUB, _CHAN):
            pos += 2
            continue
        if code > _AUX:
            raise WfdbParseError(f"invalid annotation code {code}", path, pos)
        t += val
        samples.append(t)
        symbols.append(ANN_SYMBOLS.get(code, f"[{code}]"))
        pos += 2
    else:
        if n:
            raise WfdbParseError("annotation file lacks end marker", path, n)
    return np.asarray(samples, dtype=np.int64), symbols


def encode_annotations(samples, symbols) -> bytes:
    out = bytearray()
    t = 0
    for s, sym in zip(samples, symbols):
        s = int(s)
        if sym.startswith("[") and sym.endswith("]"):
            code = int(sym[1:-1])
        else:
            code = ANN_CODES[sym]
        delta = s - t
        if delta < 0:
            raise ValueError("annotations must be in sample order")
        if delta > 0x3FF:
            out += (_SKIP << 10).to_bytes(2, "little")
            out += ((delta >> 16) & 0xFFFF).to_bytes(2, "little")
            out += (delta & 0xFFFF).to_bytes(2, "little")
            delta = 0
        out += ((code << 10) | delta).to_bytes(2, "little")
        t = s
    out += b"\x00\x00"
    return bytes(out)


def write_wfdb_record(directory, record: EcgRecord, name: str | None = None) -> Path:
    """Write a single-channel format-212 record with its ``.atr`` file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or str(record.record_id)
    (directory / f"{name}.dat").write_bytes(encode_212(record.samples))
    checksum = int(np.sum(record.samples)) & 0xFFFF
    checksum = checksum - 0x10000 if checksum >= 0x8000 else checksum
    init = int(record.samples[0]) if len(record.samples) else 0
    (directory / f"{name}.hea").write_text(
        f"{name} 1 {record.sample_rate} {len(record.samples)}\n"
        f"{name}.dat 212 200 11 1024 {init} {checksum} 0 MLII\n")
    (directory / f"{name}.atr").write_bytes(
        encode_annotations(record.ann_samples, record.ann_symbols))
    return directory / f"{name}.hea"


def _read_csv_pairs(path, value_name):
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sample_index", value_name]:
            raise WfdbParseError(f"expected header 'sample_index,{value_name}'", path)
        idx, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise WfdbParseError(f"line {lineno}: expected 2 columns", path)
            idx.append(int(row[0]))
            vals.append(row[1])
    return idx, vals


def read_csv_record(signal_csv, annotation_csv, record_id: int) -> EcgRecord:
    idx, vals = _read_csv_pairs(signal_csv, "value")
    if idx != list(range(len(idx))):
        raise WfdbParseError("signal sample indices must be 0, 1, 2, ...", signal_csv)
    ann_idx, syms = _read_csv_pairs(annotation_csv, "symbol")
    return EcgRecord(record_id, np.array([int(v) for v in vals], dtype=np.int64),
                     np.array(ann_idx, dtype=np.int64), syms)


def write_csv_record(directory, record: EcgRecord) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sig = directory / f"{record.record_id}_signal.csv"
    ann = directory / f"{record.record_id}_annotations.csv"
    with sig.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample_index", "value"])
        w.writerows(enumerate(record.samples.tolist()))
    with ann.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample_index", "symbol"])
        w.writerows(zip(record.ann_samples.tolist(), record.ann_symbols))
    return sig, ann


def read_record(signal_file, annotation_file, record_id: int | None = None) -> EcgRecord:
    """Load one record from a ``.hea``/``.dat`` plus ``.atr`` pair, or from
    the CSV fallback pair.

    ``signal_file`` may name the header or the ``.dat`` file; the header is
    expected next to it.
    """
    signal_file = Path(signal_file)
    if record_id is None:
        stem = signal_file.stem.split("_")[0]
        record_id = int(stem) if stem.isdigit() else -1
    if signal_file.suffix.lower() == ".csv":
        return read_csv_record(signal_file, annotation_file, record_id)
    header = signal_file.with_suffix(".hea")
    samples = read_signal_212(header)
    ann_samples, symbols = read_annotations(annotation_file)
    try:
        return EcgRecord(record_id, samples, ann_samples, symbols)
    except ValueError as exc:
        raise WfdbParseError(str(exc), annotation_file) from exc


def locate_record(directory, record_id: int, fmt: str = "wfdb") -> tuple[Path, Path] | None:
    directory = Path(directory)
    if fmt == "wfdb":
        pair = directory / f"{record_id}.hea", directory / f"{record_id}.atr"
    elif fmt == "csv":
        pair = (directory / f"{record_id}_signal.csv",
                directory / f"{record_id}_annotations.csv")
    else:
        raise ValueError(f"unknown record format {fmt!r}")
    return pair if all(p.exists() for p in pair) else None
