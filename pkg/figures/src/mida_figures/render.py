"""Render experiment CSVs into figures.

The four figure kinds consume the experiment CSV schemas directly:

    wdensity:  rho,w
    pr:        setting,k,method,precision,recall
    fdr:       p,n,alpha,pipeline,target,empirical_fdr,power
    coverage:  p,n,group,median_coverage,mean_coverage,coverage_sd,avg_length,count,excluded

render() validates the schema first and only touches the output path after a
figure has been fully assembled, so a failed job leaves no file behind. It
returns the plotted series keyed by curve label so callers can check that
re-rendering reproduces identical data.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import gaussian_kde

KINDS = ("wdensity", "pr", "fdr", "coverage")

REQUIRED_COLUMNS = {
    "wdensity": ("rho", "w"),
    "pr": ("setting", "k", "method", "precision", "recall"),
    "fdr": ("p", "n", "alpha", "pipeline", "target", "empirical_fdr", "power"),
    "coverage": ("p", "n", "group", "median_coverage", "mean_coverage",
                 "coverage_sd", "avg_length", "count", "excluded"),
}


class FigureError(Exception):
    pass


class SchemaError(FigureError):
    pass


class EmptyInputError(FigureError):
    pass


@dataclass(frozen=True)
class FigureJob:
    kind: str
    input_csv: tuple[str, ...]
    output: str
    title: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}")
        if not self.input_csv:
            raise FigureError("need at least one input CSV")


def _read_rows(paths: tuple[str, ...], kind: str) -> list[dict[str, str]]:
    rows: list[dict[str, str]] = []
    required = REQUIRED_COLUMNS[kind]
    for path in paths:
        if not os.path.exists(path):
            raise FigureError(f"input file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in required:
                if col not in header:
                    raise SchemaError(f"missing column {col!r} in {path}")
            rows.extend(reader)
    if not rows:
        raise EmptyInputError(f"no data rows in {', '.join(paths)}")
    return rows


Series = dict[str, tuple[np.ndarray, np.ndarray]]


def _wdensity_series(rows: list[dict[str, str]]) -> Series:
    by_rho: dict[float, list[float]] = {}
    for row in rows:
        by_rho.setdefault(float(row["rho"]), []).append(float(row["w"]))
    grid = np.linspace(-4.0, 4.0, 401)
    series: Series = {}
    for rho in sorted(by_rho):
        kde = gaussian_kde(np.asarray(by_rho[rho]), bw_method="silverman")
        series[f"rho={rho:g}"] = (grid, kde(grid))
    series["N(0,1)"] = (grid, np.exp(-grid**2 / 2.0) / math.sqrt(2.0 * math.pi))
    return series


def _pr_series(rows: list[dict[str, str]]) -> Series:
    by_curve: dict[str, list[tuple[int, float, float]]] = {}
    for row in rows:
        label = f"{row['setting']}/{row['method']}"
        by_curve.setdefault(label, []).append(
            (int(row["k"]), float(row["recall"]), float(row["precision"])))
    series: Series = {}
    for label, pts in by_curve.items():
        pts.sort()
        series[label] = (np.array([x for _, x, _ in pts]),
                         np.array([y for _, _, y in pts]))
    return series


def _fdr_series(rows: list[dict[str, str]]) -> Series:
    by_curve: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        label = f"{row['pipeline']}/{row['target']}"
        by_curve.setdefault(label, []).append(
            (float(row["alpha"]), float(row["empirical_fdr"])))
    series: Series = {}
    for label, pts in by_curve.items():
        pts.sort()
        series[label] = (np.array([a for a, _ in pts]),
                         np.array([f for _, f in pts]))
    return series


def _coverage_series(rows: list[dict[str, str]]) -> Series:
    series: Series = {}
    order = {"low": 0, "medium": 1, "high": 2}
    by_n: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        label = f"n={row['n']}"
        by_n.setdefault(label, []).append(
            (order.get(row["group"], 3), float(row["mean_coverage"])))
    for label, pts in by_n.items():
        pts.sort()
        series[label] = (np.array([g for g, _ in pts], dtype=float),
                         np.array([c for _, c in pts]))
    return series


def render(job: FigureJob) -> Series:
    """Build the figure for the job, write the image, return plotted series."""
    rows = _read_rows(job.input_csv, job.kind)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        if job.kind == "wdensity":
            series = _wdensity_series(rows)
            for label, (x, y) in series.items():
                if label == "N(0,1)":
                    ax.plot(x, y, "k--", label=label)
                else:
                    ax.plot(x, y, label=label)
            ax.set_xlabel("w")
            ax.set_ylabel("density")
        elif job.kind == "pr":
            series = _pr_series(rows)
            for label, (x, y) in series.items():
                ax.plot(x, y, label=label)
            ax.set_xlabel("recall")
            ax.set_ylabel("precision")
            ax.set_xlim(0.0, 1.0)
        elif job.kind == "fdr":
            series = _fdr_series(rows)
            for label, (x, y) in series.items():
                ax.plot(x, y, marker="o", label=label)
            ax.set_xlabel("alpha")
            ax.set_ylabel("empirical FDR")
        else:
            series = _coverage_series(rows)
            groups = ("low", "medium", "high")
            width = 0.8 / max(len(series), 1)
            for slot, (label, (x, y)) in enumerate(sorted(series.items())):
                ax.bar(x + slot * width, y, width=width, label=label)
            ax.set_xticks(np.arange(len(groups)) + 0.4 - width / 2, groups)
            ax.set_ylabel("mean coverage (%)")
            ax.set_ylim(0.0, 105.0)
        if job.title:
            ax.set_title(job.title)
        ax.legend(fontsize=8)
        out_dir = os.path.dirname(job.output)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        fig.savefig(job.output, dpi=150)
    finally:
        plt.close(fig)
    return series
