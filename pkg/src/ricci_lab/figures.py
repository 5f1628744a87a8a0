"""Figure rendering for report output.

Everything draws through the Agg backend and writes straight to files;
no interactive windows. Callers pass plain data (records, convergence
rows, flow runs) and get the written path back.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FLOOR = 1e-17


def residual_figure(records, path: str, title: str = "residuals") -> str:
    """Horizontal log-scale bars of record values against tolerances."""
    rows = [r.as_dict() if hasattr(r, "as_dict") else r for r in records]
    rows = [r for r in rows if "value" in r and np.isfinite(r["value"])]
    if not rows:
        raise ValueError("no records with numeric values to plot")
    labels = [r["label"] for r in rows]
    values = [max(abs(r["value"]), _FLOOR) for r in rows]
    tols = [r.get("tol") for r in rows]
    colors = ["tab:green" if r.get("passed", True) else "tab:red"
              for r in rows]

    fig, ax = plt.subplots(figsize=(8.0, 0.5 * len(rows) + 1.5))
    y = np.arange(len(rows))
    ax.barh(y, values, color=colors)
    for yi, tol in zip(y, tols):
        if tol:
            ax.plot([tol, tol], [yi - 0.4, yi + 0.4], "k--", lw=1.0)
    ax.set_xscale("log")
    ax.set_yticks(y)
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("residual (dashed: tolerance)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def convergence_figure(rows, path: str,
                       title: str = "quadrature convergence") -> str:
    """Log-log error against rule order; one line per labelled series.

    ``rows`` maps series label -> list of (order, error) pairs.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, pairs in rows.items():
        orders = [p[0] for p in pairs]
        errs = [max(abs(p[1]), _FLOOR) for p in pairs]
        ax.loglog(orders, errs, "o-", label=label)
    ax.set_xlabel("rule order")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def trajectory_figure(run, path: str, title: str = "flow profiles") -> str:
    """Metric coefficients along the chart axis at each stored time."""
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0), sharex=True)
    for state in run.snapshots:
        axes[0].plot(state.x, state.A, label=f"t={state.t:.4g}")
        axes[1].plot(state.x, state.W, label=f"t={state.t:.4g}")
    axes[0].set_ylabel("A (axis coefficient)")
    axes[1].set_ylabel("W (fiber coefficient)")
    axes[1].set_yscale("log")
    for ax in axes:
        ax.set_xlabel("x1")
        ax.legend(fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def error_profile_figure(x, errors, path: str,
                         title: str = "node error") -> str:
    """Semilog plot of per-node relative error; ``errors`` maps
    label -> array over nodes."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for label, err in errors.items():
        ax.semilogy(x, np.maximum(np.abs(err), _FLOOR), label=label)
    ax.set_xlabel("x1")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
