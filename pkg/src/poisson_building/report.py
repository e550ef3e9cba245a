"""Tabular results: CSV with an embedded provenance header, plus a PNG rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .montecarlo import EstimateReport

MC_COLUMNS = ["mc_point", "mc_stderr", "mc_ci_lo", "mc_ci_hi"]


def mc_cells(est: EstimateReport | None) -> list[float]:
    if est is None:
        return [math.nan] * 4
    lo, hi = est.ci95
    return [est.point, est.stderr, lo, hi]


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


@dataclass
class Table:
    """One result family: rows keyed by ``x`` and grouped into curves by ``group``."""

    name: str
    columns: list[str]
    x: str
    y: str
    group: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)
    xlabel: str | None = None
    ylabel: str | None = None
    logx: bool = False
    logy: bool = False

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} cells, got {len(values)}")
        self.rows.append(list(values))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def body(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_csv(self, config_json: str) -> str:
        head = f"# tool: poisson-building {__version__}\n# table: {self.name}\n# config: {config_json}\n"
        return head + self.body()

    def curves(self):
        """``(label, xs, ys, errs)`` per group, in first-appearance order."""
        idx = [self.columns.index(g) for g in self.group]
        xi, yi = self.columns.index(self.x), self.columns.index(self.y)
        mi = self.columns.index("mc_point") if "mc_point" in self.columns else None
        si = self.columns.index("mc_stderr") if mi is not None else None
        out: dict[tuple, list] = {}
        for row in self.rows:
            key = tuple(row[i] for i in idx)
            out.setdefault(key, []).append(row)
        for key, rows in out.items():
            label = ", ".join(f"{g}={_cell(v)}" for g, v in zip(self.group, key)) or self.y
            xs = [r[xi] for r in rows]
            ys = [r[yi] for r in rows]
            mc = None
            if mi is not None:
                mc = ([r[mi] for r in rows], [r[si] for r in rows])
            yield label, xs, ys, mc


def write_tables(tables: Sequence[Table], out: Path, config_json: str, png: bool = True) -> list[Path]:
    """Write ``<out>/<name>.csv`` (and ``.png``) for each table; returns the written paths."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for t in tables:
        path = out / f"{t.name}.csv"
        path.write_text(t.to_csv(config_json))
        written.append(path)
        if png:
            written.append(plot_table(t, out / f"{t.name}.png"))
    return written


def plot_table(t: Table, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for label, xs, ys, mc in t.curves():
        (line,) = ax.plot(xs, ys, label=label)
        if mc is not None and any(math.isfinite(v) for v in mc[0]):
            ax.errorbar(xs, mc[0], yerr=[1.96 * s for s in mc[1]], fmt="o", ms=3, color=line.get_color(),
                        capsize=2)
    ax.set_xlabel(t.xlabel or t.x)
    ax.set_ylabel(t.ylabel or t.y)
    if t.logx:
        ax.set_xscale("log")
    if t.logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    ax.set_title(t.name)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
