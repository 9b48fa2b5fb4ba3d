"""Confusion matrices and the arrhythmia scores built on them.

Rows are true classes, columns predicted classes, in the order N, S, V, F.
Sensitivity or predictive-value terms with a zero denominator count as 0.
Kappa is NaN when chance agreement is 1 (all mass in one cell) or the
matrix is empty; the combined index inherits the NaN.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

CLASSES = ("N", "S", "V", "F")
_INDEX = {c: i for i, c in enumerate(CLASSES)}


def _as_indices(seq, n_classes):
    out = []
    for v in seq:
        if isinstance(v, str):
            if v not in _INDEX:
                raise ValueError(f"unknown class label {v!r}")
            out.append(_INDEX[v])
        else:
            i = int(v)
            if not 0 <= i < n_classes:
                raise ValueError(f"class index {i} out of range")
            out.append(i)
    return np.asarray(out, dtype=np.int64)


def confusion(preds, labels, n_classes: int = len(CLASSES)) -> np.ndarray:
    preds = list(preds)
    labels = list(labels)
    if len(preds) != len(labels):
        raise ValueError(f"{len(preds)} predictions but {len(labels)} labels")
    C = np.zeros((n_classes, n_classes), dtype=np.int64)
    if preds:
        np.add.at(C, (_as_indices(labels, n_classes), _as_indices(preds, n_classes)), 1)
    return C


def _ratio(num, den):
    return float(num) / float(den) if den else 0.0


def accuracy(C) -> float:
    C = np.asarray(C)
    return _ratio(np.trace(C), C.sum())


def sensitivity(C, k: int) -> float:
    C = np.asarray(C)
    return _ratio(C[k, k], C[k, :].sum())


def ppv(C, k: int) -> float:
    C = np.asarray(C)
    return _ratio(C[k, k], C[:, k].sum())


def j_index(C) -> float:
    S, V = _INDEX["S"], _INDEX["V"]
    return sensitivity(C, S) + sensitivity(C, V) + ppv(C, S) + ppv(C, V)


def kappa(C) -> float:
    C = np.asarray(C, dtype=np.float64)
    total = C.sum()
    if total <= 0:
        return math.nan
    pe = float((C.sum(axis=0) * C.sum(axis=1)).sum()) / total**2
    if pe >= 1.0:
        return math.nan
    return (np.trace(C) / total - pe) / (1.0 - pe)


def jk_index(C) -> float:
    return j_index(C) / 8.0 + kappa(C) / 2.0


def class_labels(n: int) -> tuple[str, ...]:
    """Display names: N/S/V/F for four classes, digits otherwise."""
    return CLASSES if n == len(CLASSES) else tuple(str(i) for i in range(n))


def report_rows(C) -> list[dict]:
    """Per-class SEN/PPV, accuracy and kappa; j and jk only for the four
    arrhythmia classes (NaN otherwise)."""
    C = np.asarray(C)
    names = class_labels(len(C))
    four = len(C) == len(CLASSES)
    rows = [{"metric": f"SEN_{c}", "value": sensitivity(C, k)} for k, c in enumerate(names)]
    rows += [{"metric": f"PPV_{c}", "value": ppv(C, k)} for k, c in enumerate(names)]
    rows += [
        {"metric": "accuracy", "value": accuracy(C)},
        {"metric": "j_index", "value": j_index(C) if four else math.nan},
        {"metric": "kappa", "value": kappa(C)},
        {"metric": "jk_index", "value": jk_index(C) if four else math.nan},
    ]
    return rows


def report_csv(C) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for r in report_rows(C):
        w.writerow([r["metric"], f"{r['value']:.6f}"])
    return buf.getvalue()


def confusion_csv(C) -> str:
    C = np.asarray(C)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = class_labels(len(C))
    w.writerow(["true\\pred", *names])
    for c, row in zip(names, C):
        w.writerow([c, *map(int, row)])
    return buf.getvalue()


def report_table(C) -> str:
    C = np.asarray(C)
    names = class_labels(len(C))
    vals = {r["metric"]: r["value"] for r in report_rows(C)}
    lines = ["class    SEN      PPV"]
    for k, c in enumerate(names):
        lines.append(f"{c:<5} {sensitivity(C, k):8.4f} {ppv(C, k):8.4f}")
    lines.append(f"accuracy {vals['accuracy']:.4f}")
    lines.append(f"j        {vals['j_index']:.4f}")
    lines.append(f"kappa    {vals['kappa']:.4f}")
    lines.append(f"jk       {vals['jk_index']:.4f}")
    lines.append("confusion (rows=true, cols=pred):")
    lines.append("      " + " ".join(f"{c:>7}" for c in names))
    for c, row in zip(names, C):
        lines.append(f"{c:<5} " + " ".join(f"{int(v):7d}" for v in row))
    return "\n".join(lines)
