"""Freshness-vs-sampling-rate figures from sweep rows or CSV files.

matplotlib is imported on first use so the numerical core never needs it.
"""
from __future__ import annotations

from collections import defaultdict

__all__ = ["curve_label", "group_curves", "plot_rows", "plot_csv"]

_STYLES = {"analytic": "-", "oracle": "--", "sim": "o"}


def _num(v):
    if v in (None, ""):
        return None
    return float(v)


def _as_dict(row) -> dict:
    if isinstance(row, dict):
        return row
    cells = row.cells()
    from .experiments import CSV_COLUMNS
    return dict(zip(CSV_COLUMNS, cells))


def curve_label(row: dict) -> str:
    kind = row["estimator"]
    lam, gamma, tau = _num(row["lambda"]), _num(row["gamma"]), _num(row["tau"])
    if kind == "exponential":
        return f"exponential lambda={lam:.4g}"
    if kind == "erlang":
        return f"erlang gamma={int(gamma)} lambda={lam:.4g}"
    if kind == "tau_map":
        return f"tau-MAP tau={tau:.4g}"
    return kind


def group_curves(rows) -> dict:
    """Map ``(label, method)`` to sorted ``(mu, freshness, ci)`` lists."""
    out = defaultdict(list)
    for r in map(_as_dict, rows):
        ci = _num(r["ci_halfwidth"])
        out[(curve_label(r), r["method"])].append((float(r["mu"]), float(r["freshness"]), ci))
    return {k: sorted(v) for k, v in out.items()}


def plot_rows(rows, path, title=None, logx=True) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = group_curves(rows)
    labels = sorted({k[0] for k in curves})
    colors = {lab: f"C{i % 10}" for i, lab in enumerate(labels)}
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for (label, method), pts in sorted(curves.items()):
        mu = [p[0] for p in pts]
        f = [p[1] for p in pts]
        style = _STYLES.get(method, "-")
        name = label if method == "analytic" or len(curves) == len(labels) else f"{label} ({method})"
        if method == "sim":
            err = [p[2] or 0.0 for p in pts]
            ax.errorbar(mu, f, yerr=err, fmt=style, ms=3, color=colors[label], label=name)
        else:
            ax.plot(mu, f, style, color=colors[label], label=name)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel("sampling rate mu")
    ax.set_ylabel("binary freshness")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_csv(csv_path, path, title=None) -> None:
    from .experiments import read_csv
    plot_rows(read_csv(csv_path), path, title=title)
