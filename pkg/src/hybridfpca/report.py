"""Figure rendering for study outputs.

Turns the delimited artifacts (per-q selection traces, per-cell quartile
report rows) into PNG figures written alongside them.  Rendering is the only
place the package touches matplotlib; everything else stays headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np

from .metrics import ReportRow

__all__ = ["render_selection_figures", "render_metric_figures"]

_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_selection_figures(
    qs, mspe_train, mspe_test, seconds, out_dir, stem: str = "selection", q_min=None
) -> list[Path]:
    """Two figures: prediction error by component count, and cost by count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    qs = np.asarray(qs)
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(qs, mspe_train, marker="o", label="train")
    ax.plot(qs, mspe_test, marker="s", label="test")
    if q_min is not None:
        ax.axvline(q_min, color="gray", linestyle="--", linewidth=1.0)
        ax.annotate(f"q_min = {q_min}", xy=(q_min, np.max(mspe_test)), fontsize=9)
    ax.set_xlabel("components kept (q)")
    ax.set_ylabel("MSPE")
    ax.set_title("Prediction error by component count")
    ax.legend()
    written.append(_save(fig, out_dir / f"{stem}_mspe.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(qs, seconds, marker="o", color="tab:green")
    ax.set_xlabel("components kept (q)")
    ax.set_ylabel("seconds per candidate")
    ax.set_title("Fit cost by component count")
    written.append(_save(fig, out_dir / f"{stem}_seconds.png"))
    return written


def _family(metric: str) -> str:
    if metric.startswith("mse_beta_"):
        return "mse_beta"
    if metric.startswith("mspe_"):
        return "mspe"
    if metric.startswith("cor_"):
        return "cor"
    if metric.startswith("time_"):
        return "time"
    return "other"


def _errbars(rows: list[ReportRow]):
    med = np.array([r.median for r in rows])
    lo = np.clip(med - np.array([r.q1 for r in rows]), 0.0, None)
    hi = np.clip(np.array([r.q3 for r in rows]) - med, 0.0, None)
    return med, np.vstack([lo, hi])


def _grouped_bars(ax, cells, by_metric):
    width = 0.8 / max(len(by_metric), 1)
    x = np.arange(len(cells))
    for k, (metric, per_cell) in enumerate(by_metric.items()):
        rows = [per_cell[c] for c in cells if c in per_cell]
        xs = np.array([i for i, c in enumerate(cells) if c in per_cell])
        med, err = _errbars(rows)
        ax.bar(xs + k * width, med, width, yerr=err, capsize=3, label=metric)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(cells, rotation=30, ha="right", fontsize=8)
    ax.legend(fontsize=8)


def render_metric_figures(rows: list[ReportRow], out_dir, stem: str = "report") -> list[Path]:
    """One figure per metric family per scenario, medians with quartile bars."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    scenarios = sorted({r.scenario for r in rows})
    for scenario in scenarios:
        scoped = [r for r in rows if r.scenario == scenario]
        cells = list(dict.fromkeys(r.cell for r in scoped))
        families = {}
        for r in scoped:
            families.setdefault(_family(r.metric), []).append(r)

        if "mse_beta" in families:
            fam = families["mse_beta"]
            fig, ax = plt.subplots(figsize=(7.0, 4.5))
            for cell in cells:
                cell_rows = sorted(
                    (r for r in fam if r.cell == cell),
                    key=lambda r: int(r.metric.rsplit("_", 1)[1]),
                )
                if not cell_rows:
                    continue
                j = [int(r.metric.rsplit("_", 1)[1]) for r in cell_rows]
                med, err = _errbars(cell_rows)
                ax.errorbar(j, med, yerr=err, marker="o", capsize=3, label=cell)
            ax.set_xlabel("coefficient surface index")
            ax.set_ylabel("MSE of the surface estimate")
            ax.set_title(f"{scenario}: surface recovery")
            ax.legend(fontsize=8)
            written.append(_save(fig, out_dir / f"{stem}_{scenario}_mse_beta.png"))

        for family, ylabel, title in (
            ("mspe", "MSPE", "prediction error"),
            ("cor", "correlation", "prediction correlation"),
            ("time", "seconds", "computation time"),
        ):
            if family not in families:
                continue
            per_metric = {}
            for r in families[family]:
                per_metric.setdefault(r.metric, {})[r.cell] = r
            fig, ax = plt.subplots(figsize=(7.0, 4.5))
            _grouped_bars(ax, cells, per_metric)
            ax.set_ylabel(ylabel)
            ax.set_title(f"{scenario}: {title}")
            written.append(_save(fig, out_dir / f"{stem}_{scenario}_{family}.png"))
    return written
