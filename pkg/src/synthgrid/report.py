"""Aggregation of distance reports and HEMS profits into one comparison
table plus overlay / profile plots."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .ingest import DailyProfileSet, denormalize

METRIC_COLUMNS = ("kl_nats", "wasserstein", "mmd_squared")


def build_comparison_table(reports, hems_totals=None):
    """Rows: one per model; columns: metric x channel (Table-style layout),
    plus mean HEMS profit where available.

    reports: list of DistanceReport dicts (as serialized by metrics).
    hems_totals: optional mapping model -> total profit.
    """
    channels = sorted({r["channel"] for r in reports})
    models = sorted({r["model"] for r in reports})
    by_key = {(r["model"], r["channel"]): r for r in reports}

    header = ["model"]
    for metric in METRIC_COLUMNS:
        for ch in channels:
            header.append(f"{metric}_{ch}")
    if hems_totals:
        header.append("hems_total_profit")

    rows = []
    for model in models:
        row = [model]
        for metric in METRIC_COLUMNS:
            for ch in channels:
                rep = by_key.get((model, ch))
                row.append("" if rep is None else repr(float(rep[metric])))
        if hems_totals:
            total = hems_totals.get(model)
            row.append("" if total is None else repr(float(total)))
        rows.append(row)
    return header, rows


def write_table_csv(header, rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(str(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _raw_samples(profile_set: DailyProfileSet) -> np.ndarray:
    raw = denormalize(profile_set) if profile_set.normalized else profile_set
    return raw.flat_samples()


def plot_pdf_overlay(real: DailyProfileSet, synth: DailyProfileSet, title: str, path, bins=50):
    """Real-vs-synthetic probability density overlay for one channel/model."""
    x = _raw_samples(real)
    y = _raw_samples(synth)
    lo = min(x.min(), y.min())
    hi = max(x.max(), y.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for samples, label, color in ((x, "real", "tab:orange"), (y, "synthetic", "tab:blue")):
        dens, edges = np.histogram(samples, bins=bins, range=(lo, hi), density=True)
        centers = 0.5 * (edges[:-1] + edges[1:])
        ax.plot(centers, dens, label=label, color=color)
    ax.set_title(title)
    ax.set_xlabel("power (W)")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_profile_sample(real: DailyProfileSet, synth: DailyProfileSet, title: str, path, n_days=10):
    """A few consecutive days of real and synthetic profiles, side by side."""
    x = denormalize(real) if real.normalized else real
    y = denormalize(synth) if synth.normalized else synth
    nr = min(n_days, x.n_days)
    ns = min(n_days, y.n_days)
    fig, axes = plt.subplots(2, 1, figsize=(8, 4.4), sharex=True)
    axes[0].plot(x.profiles[:nr].reshape(-1), color="tab:orange", linewidth=0.8)
    axes[0].set_ylabel("real (W)")
    axes[1].plot(y.profiles[:ns].reshape(-1), color="tab:blue", linewidth=0.8)
    axes[1].set_ylabel("synthetic (W)")
    axes[1].set_xlabel("quarter-hour steps")
    fig.suptitle(title)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_profit_curves(daily_profits, labels, path):
    """Cumulative daily profit per model over the online test days."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for profits, label in zip(daily_profits, labels):
        ax.plot(np.cumsum(profits), label=label)
    ax.set_xlabel("test day")
    ax.set_ylabel("cumulative profit")
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
