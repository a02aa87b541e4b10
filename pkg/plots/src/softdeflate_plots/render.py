"""Turn benchmark result CSVs into comparison figures plus a testable aggregate.

Input is the fixed schema emitted by the softdeflate harness:

    algorithm,n,k,spectrum,m,seed,fro_err,sin_theta,sin_theta_blocks,iters,wall_ms

For each requested y metric one figure is written: x is the observation
budget m, one line per (algorithm, spectrum) group showing the mean over
seeds with a min/max band, y on a log scale.  Because image bytes are an
awkward thing to assert on, every render also emits `aggregate.csv` next
to the figures with the exact mean/min/max per curve point; its mean
column equals the arithmetic mean of the input rows to full precision.
Input files are never written to.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

REQUIRED_COLUMNS = ("algorithm", "n", "k", "spectrum", "m", "seed")
SUPPORTED_METRICS = ("fro_err", "sin_theta", "fro_err_abs", "wall_ms")

AGGREGATE_HEADER = "metric,algorithm,spectrum,n,k,m,mean,min,max,count"


class RenderError(ValueError):
    """Bad figure spec or input that cannot be rendered."""


@dataclass(frozen=True)
class FigureSpec:
    """What to read, which metrics to panel, where to write."""

    inputs: tuple[str, ...]
    y_metrics: tuple[str, ...] = ("fro_err", "sin_theta")
    out_dir: str = "figs"

    def __post_init__(self):
        if not self.inputs:
            raise RenderError("at least one input CSV is required")
        if not self.y_metrics:
            raise RenderError("at least one y metric is required")
        for metric in self.y_metrics:
            if metric not in SUPPORTED_METRICS:
                raise RenderError(f"unsupported metric {metric!r}; pick from {SUPPORTED_METRICS}")


def read_rows(paths) -> list[dict]:
    """Read and lightly type the benchmark CSVs; validates the schema."""
    rows: list[dict] = []
    for path in paths:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise RenderError(f"{path}: missing required columns {missing}")
            for rec in reader:
                rec = dict(rec)
                rec["n"] = int(rec["n"])
                rec["k"] = int(rec["k"])
                rec["m"] = int(rec["m"])
                rec["seed"] = int(rec["seed"])
                rows.append(rec)
    return rows


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(rows: list[dict], metric: str) -> list[dict]:
    """Collapse seeds: one record per (algorithm, spectrum, n, k, m)."""
    if not rows:
        raise RenderError("no input rows")
    if metric not in rows[0]:
        raise RenderError(f"metric column {metric!r} absent from the input")
    groups: dict[tuple, list[float]] = {}
    for rec in rows:
        key = (rec["algorithm"], rec["spectrum"], rec["n"], rec["k"], rec["m"])
        groups.setdefault(key, []).append(float(rec[metric]))
    out = []
    for key in sorted(groups):
        vals = groups[key]
        algorithm, spectrum, n, k, m = key
        out.append(
            dict(
                metric=metric,
                algorithm=algorithm,
                spectrum=spectrum,
                n=n,
                k=k,
                m=m,
                mean=_mean(vals),
                min=min(vals),
                max=max(vals),
                count=len(vals),
            )
        )
    return out


def _write_aggregate(path: Path, records: list[dict]) -> None:
    lines = [AGGREGATE_HEADER]
    for rec in records:
        lines.append(
            ",".join(
                [
                    rec["metric"],
                    rec["algorithm"],
                    rec["spectrum"],
                    str(rec["n"]),
                    str(rec["k"]),
                    str(rec["m"]),
                    repr(float(rec["mean"])),
                    repr(float(rec["min"])),
                    repr(float(rec["max"])),
                    str(rec["count"]),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _title(rows: list[dict]) -> str:
    ns = sorted({r["n"] for r in rows})
    ks = sorted({r["k"] for r in rows})
    spectra = sorted({r["spectrum"] for r in rows})
    fmt = lambda vals: ", ".join(str(v) for v in vals)
    return f"n={fmt(ns)}  k={fmt(ks)}  spectrum={fmt(spectra)}"


def _plot_metric(records: list[dict], metric: str, title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    curves: dict[tuple, list[dict]] = {}
    for rec in records:
        curves.setdefault((rec["algorithm"], rec["spectrum"]), []).append(rec)
    multi_spectrum = len({key[1] for key in curves}) > 1
    for (algorithm, spectrum), recs in sorted(curves.items()):
        recs = sorted(recs, key=lambda r: r["m"])
        xs = [r["m"] for r in recs]
        label = f"{algorithm} [{spectrum}]" if multi_spectrum else algorithm
        line = ax.plot(xs, [r["mean"] for r in recs], marker="o", label=label)[0]
        ax.fill_between(
            xs,
            [r["min"] for r in recs],
            [r["max"] for r in recs],
            alpha=0.2,
            color=line.get_color(),
        )
    ax.set_xlabel("observations m")
    ax.set_ylabel(metric)
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison(spec: FigureSpec) -> dict:
    """Render one figure per metric plus the companion aggregate CSV.

    Returns {"figures": [paths], "aggregate": path}.
    """
    rows = read_rows(spec.inputs)
    if not rows:
        raise RenderError("input CSVs contain no data rows")
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    title = _title(rows)
    all_records: list[dict] = []
    figures: list[Path] = []
    for metric in spec.y_metrics:
        records = aggregate(rows, metric)
        all_records.extend(records)
        fig_path = out_dir / f"{metric}.png"
        # guard the log axis against exact zeros: matplotlib drops
        # nonpositive values silently, so nudge them to a tiny floor
        floored = [
            {**r, "mean": max(r["mean"], 1e-18), "min": max(r["min"], 1e-18),
             "max": max(r["max"], 1e-18)}
            for r in records
        ]
        _plot_metric(floored, metric, title, fig_path)
        figures.append(fig_path)
    agg_path = out_dir / "aggregate.csv"
    _write_aggregate(agg_path, all_records)
    return {"figures": figures, "aggregate": agg_path}
