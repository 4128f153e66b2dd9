"""Figure rendering for CLI reports (headless, written straight to files)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
COLORS = ["#08589e", "#d95f0e", "#2b8cbe", "#7bccc4", "#993404", "#636363"]

STYLE = {
    "axes.prop_cycle": matplotlib.cycler(color=COLORS),
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.family": "serif",
    "font.size": 8,
    "mathtext.fontset": "stix",
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3.5,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # drop timestamps so identical data gives identical files
    "svg.hashsalt": "qcoord",
}


def size(scale: float = 1.0, width_in: float = 5.5) -> tuple[float, float]:
    w = width_in * scale
    return w, w * GOLDEN


def new(nrows: int = 1, ncols: int = 1, scale: float = 1.0):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=size(scale), squeeze=False)
    return fig, ax


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else {"Software": None})
    plt.close(fig)
    return path


def loss_traces(traces: dict[str, np.ndarray], path) -> Path:
    """One line per model: test MSE (or train loss when no test set) against epoch."""
    with plt.rc_context(STYLE):
        fig, ax = new()
        a = ax[0, 0]
        for label, tr in traces.items():
            col = 2 if np.all(np.isfinite(tr[:, 2])) else 1
            a.semilogy(tr[:, 0], tr[:, col], marker="o", label=label)
        a.set_xlabel("epoch")
        a.set_ylabel("normalized MSE")
        a.legend()
    return save(fig, path)


def benchmark_errors(rows: Sequence[dict], path) -> Path:
    """Relative error against qubits (QAE) and samples (MC) on shared log axes."""
    with plt.rc_context(STYLE):
        fig, ax = new(1, 2, scale=1.2)
        q, m = ax[0, 0], ax[0, 1]
        for variant in sorted({r["variant"] for r in rows if r["method"] != "mc"}):
            sel = [r for r in rows if r["variant"] == variant and r["method"] != "mc" and r.get("error", "") == ""]
            if sel:
                q.semilogy([r["n_or_samples"] for r in sel], [max(r["rel_error_pct"], 1e-6) for r in sel],
                           marker="o", label=variant)
        q.set_xlabel("state qubits $n$")
        q.set_ylabel("relative error (%)")
        q.legend()
        mc = [r for r in rows if r["method"] == "mc" and r.get("error", "") == ""]
        if mc:
            m.loglog([r["n_or_samples"] for r in mc], [max(r["rel_error_pct"], 1e-6) for r in mc], marker="s")
        m.set_xlabel("MC samples")
        fig.tight_layout()
    return save(fig, path)


def coordination_report(prices_flat, prices_opt, responses: dict[str, tuple[np.ndarray, np.ndarray]],
                        penalties: Sequence[float], path) -> Path:
    """Prices, EC responses before/after, and the voltage-penalty trace."""
    T = len(prices_opt)
    hours = np.arange(T) * 24.0 / T
    with plt.rc_context(STYLE):
        fig, ax = new(3, 1, scale=1.0)
        fig.set_size_inches(5.5, 6.5)
        a = ax[0, 0]
        a.step(hours, prices_flat, where="post", label="flat", color=COLORS[5])
        a.step(hours, prices_opt, where="post", label="coordinated")
        a.set_ylabel("EC price")
        a.legend()
        b = ax[1, 0]
        for k, (label, (before, after)) in enumerate(responses.items()):
            b.plot(hours, before, ls=":", color=COLORS[k])
            b.plot(hours, after, color=COLORS[k], label=label)
        b.set_ylabel("exchange (p.u.)")
        b.set_xlabel("hour")
        b.legend()
        c = ax[2, 0]
        c.plot(np.arange(len(penalties)), penalties, marker="o")
        c.set_xlabel("iteration")
        c.set_ylabel("mean voltage penalty")
        fig.tight_layout()
    return save(fig, path)


def runtime_curve(depths, runtimes_us, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = new(scale=0.8)
        ax[0, 0].plot(depths, runtimes_us, marker="o")
        ax[0, 0].set_xlabel("circuit depth")
        ax[0, 0].set_ylabel(r"estimated runtime ($\mu$s)")
    return save(fig, path)
