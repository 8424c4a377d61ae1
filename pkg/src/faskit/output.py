"""CSV result files and static SVG line charts for result tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

from .experiments import ResultTable


def fmt(v: float) -> str:
    """17 significant digits; enough for an exact round trip of a double."""
    return format(float(v), ".17g")


def csv_columns(table: ResultTable) -> list[str]:
    names = list(table.metric_names) or ["value"]
    cols = ["x"]
    if len(names) == 1:
        cols += ["value", "ci_low", "ci_high"]
    else:
        for m in names:
            cols += [m, f"{m}_ci_low", f"{m}_ci_high"]
    cols += ["trials", "seed"]
    if table.spec.timing:
        cols.append("wall_time_s")
    cols.append("status")
    return cols


def csv_text(table: ResultTable) -> str:
    buf = io.StringIO()
    for key, val in table.metadata.items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_columns(table))
    names = list(table.metric_names) or ["value"]
    for row in table.rows:
        line = [fmt(row.x)]
        for m in names:
            est = row.metrics.get(m)
            line += ["nan"] * 3 if est is None else [fmt(est.value), fmt(est.ci_low), fmt(est.ci_high)]
        line += [str(row.trials), str(table.spec.seed)]
        if table.spec.timing:
            line.append(fmt(row.wall_time_s))
        line.append("ok" if row.error is None else f"error: {row.error}")
        writer.writerow(line)
    return buf.getvalue()


def emit_csv(table: ResultTable, path) -> None:
    """Write the table as UTF-8 CSV with '#' metadata lines."""
    Path(path).write_text(csv_text(table), encoding="utf-8")


@dataclass(frozen=True)
class ParsedCsv:
    metadata: dict[str, str]
    columns: list[str]
    rows: list[list[str]]

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [float(r[i]) for r in self.rows]


def read_csv(path) -> ParsedCsv:
    meta: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return ParsedCsv(meta, rows[0] if rows else [], rows[1:])


# ----------------------------------------------------------------------------
# SVG


_W, _H = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 150, 30, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class PlotReport:
    skipped: int
    warnings: tuple[str, ...]


def _c(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def plot_svg(table: ResultTable, axes: str = "linear") -> tuple[str, PlotReport]:
    if axes not in ("linear", "log-y"):
        raise ValueError("axes must be 'linear' or 'log-y'")
    log = axes == "log-y"
    warnings: list[str] = []
    series = []
    for m in table.metric_names:
        pts = []
        for row in table.rows:
            est = row.metrics.get(m)
            if est is None or not math.isfinite(est.value):
                warnings.append(f"{m} at x={fmt(row.x)}: no value, skipped")
                continue
            if log and est.value <= 0:
                warnings.append(f"{m} at x={fmt(row.x)}: non-positive value under log-y, skipped")
                continue
            lo, hi = est.ci_low, est.ci_high
            if log:
                lo = lo if lo > 0 else est.value
                pts.append((row.x, math.log10(est.value), math.log10(lo), math.log10(hi)))
            else:
                pts.append((row.x, est.value, lo, hi))
        series.append((m, pts))

    xs = [p[0] for _, pts in series for p in pts] or [0.0, 1.0]
    ys = [v for _, pts in series for p in pts for v in p[1:]] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(x):
        return _LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return _TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_LEFT}" y="18" font-size="13">{escape(table.spec.kind)}</text>',
        f'<path d="M{_LEFT},{_TOP} V{_TOP + ph} H{_LEFT + pw}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_c(sx(t))}" y="{_TOP + ph + 16}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:.2f}" if log else f"{t:.4g}"
        out.append(f'<text x="{_LEFT - 6}" y="{_c(sy(t) + 4)}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.2f}" y="{_H - 12}" text-anchor="middle">'
               f'{escape(table.spec.sweep.name)}</text>')
    for k, (name, pts) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        if pts:
            upper = " ".join(f"{_c(sx(p[0]))},{_c(sy(p[3]))}" for p in pts)
            lower = " ".join(f"{_c(sx(p[0]))},{_c(sy(p[2]))}" for p in reversed(pts))
            out.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            line = " ".join(f"{_c(sx(p[0]))},{_c(sy(p[1]))}" for p in pts)
            out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _TOP + 14 * k + 6
        out.append(f'<rect x="{_W - _RIGHT + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{_W - _RIGHT + 28}" y="{ly + 1}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n", PlotReport(len(warnings), tuple(warnings))


def emit_plot(table: ResultTable, path, axes: str = "linear") -> PlotReport:
    """Write one line per metric with its interval band; returns skipped-point warnings."""
    text, report = plot_svg(table, axes)
    Path(path).write_text(text, encoding="utf-8")
    return report


def write_outputs(table: ResultTable, out: Optional[str], plot: Optional[str]) -> Optional[PlotReport]:
    if out:
        emit_csv(table, out)
    if plot:
        return emit_plot(table, plot, table.spec.axes)
    return None
