"""Figures for the CLI reports (matplotlib, Agg backend)."""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io_utils import atomic_write_bytes  # noqa: E402
from .metrics import CLASSES  # noqa: E402


def _save(fig, path) -> None:
    buf = io.BytesIO()
    # No software tag, so the bytes depend only on the plotted data.
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_training(history: list[dict], path, title: str = "training") -> None:
    """Loss curves (and held-out accuracy when logged) per epoch."""
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [h["epoch"] for h in history]
    ax.plot(epochs, [h["train_loss"] for h in history], label="train loss")
    if history and "heldout_loss" in history[0]:
        ax.plot(epochs, [h["heldout_loss"] for h in history], label="held-out loss")
        ax2 = ax.twinx()
        ax2.plot(epochs, [100 * h["heldout_accuracy"] for h in history],
                 color="tab:green", ls="--", label="held-out accuracy")
        ax2.set_ylabel("accuracy (%)")
        ax2.legend(loc="center right")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy")
    ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(rows: list[dict], path, reference: float | None = None) -> None:
    """Accuracy against stream length: one faint line per seed, the mean on top."""
    fig, ax = plt.subplots(figsize=(6, 4))
    seeds = sorted({r["seed"] for r in rows if r["seed"] != "mean"}, key=str)
    for s in seeds:
        pts = sorted((r["L"], r["accuracy"]) for r in rows if r["seed"] == s)
        ax.plot(*zip(*pts), color="0.7", lw=0.8)
    mean = sorted((r["L"], r["accuracy"]) for r in rows if r["seed"] == "mean")
    if mean:
        ax.plot(*zip(*mean), "o-", color="tab:blue", label="mean over seeds")
    if reference is not None and not math.isnan(reference):
        ax.axhline(reference, color="tab:red", ls="--", label="real-valued limit")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("stream length L")
    ax.set_ylabel("accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_confusion(C: np.ndarray, path, labels=None) -> None:
    C = np.asarray(C)
    labels = labels or (CLASSES if len(C) == len(CLASSES) else [str(i) for i in range(len(C))])
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.imshow(C, cmap="Blues")
    ax.set_xticks(range(len(C)), labels)
    ax.set_yticks(range(len(C)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    top = C.max() if C.size else 0
    for i in range(len(C)):
        for j in range(len(C)):
            ax.text(j, i, str(int(C[i, j])), ha="center", va="center",
                    color="white" if C[i, j] > top / 2 else "black", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
