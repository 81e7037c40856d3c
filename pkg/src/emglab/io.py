"""CSV matrices, JSON reports and SVG plots."""
import csv
from dataclasses import dataclass, asdict, is_dataclass
import json
import math

import numpy as np

from .errors import EmgLabError
from .spectro import SpectroDataset

SCHEMA = "emg-lab/1"


class FormatError(EmgLabError, ValueError):
    pass


def _fmt(v):
    return format(float(v), ".17g")


def _parse_cell(cell):
    cell = cell.strip()
    if cell == "":
        return math.nan
    return float(cell)


def read_matrix_csv(path):
    """Read a grid column followed by one column per spectrogram.

    Empty cells become unobserved entries. A first row that does not parse
    as numbers is taken as a header and skipped.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    start = 0
    try:
        [_parse_cell(c) for c in rows[0]]
    except ValueError:
        start = 1
    width = len(rows[start]) if start < len(rows) else 0
    if width < 2:
        raise FormatError(f"{path}: need a grid column and at least one data column")
    values = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise FormatError(f"{path}: row {i} has {len(row)} fields, expected {width}")
        try:
            values[i - start - 1] = [_parse_cell(c) for c in row]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i}: {exc}") from None
    grid = values[:, 0]
    if not np.all(np.isfinite(grid)):
        raise FormatError(f"{path}: grid column has empty or non-finite cells")
    S = values[:, 1:]
    return SpectroDataset(grid=grid, S=S, mask=np.isfinite(S))


def write_matrix_csv(path, grid, M, mask=None, header=None):
    """Write ``grid`` and the columns of ``M``; entries outside ``mask`` are left empty."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != (M.shape[0],):
        raise FormatError("grid length does not match the matrix")
    if mask is None:
        mask = np.isfinite(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for i in range(M.shape[0]):
            w.writerow([_fmt(grid[i])] + [_fmt(v) if ok else "" for v, ok in zip(M[i], mask[i])])


def write_dataset_csv(path, ds, header=True):
    head = ["grid"] + [f"s{j}" for j in range(ds.S.shape[1])] if header else None
    write_matrix_csv(path, ds.grid, ds.S, ds.mask, head)


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_dict(report):
    if hasattr(report, "to_dict"):
        report = report.to_dict()
    d = _jsonable(report)
    if not isinstance(d, dict):
        raise TypeError("a report must serialize to a JSON object")
    d["schema"] = SCHEMA
    d.setdefault("records", [])
    return d


def write_report_json(report, path):
    """Write ``report`` (dict, dataclass or object with ``to_dict``) as JSON."""
    d = report_dict(report)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d


def read_report_json(path):
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema") != SCHEMA:
        raise FormatError(f"{path}: schema {d.get('schema')!r} is not {SCHEMA!r}")
    return d


@dataclass
class Series:
    name: str
    x: np.ndarray
    y: np.ndarray
    kind: str = "line"      # "line" or "scatter"


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def emit_plot_svg(series, path, title="", xlabel="", ylabel="", logx=False, logy=False,
                  width=640, height=420):
    """Write a standalone SVG of line and scatter series with axes and legend."""
    series = [s if isinstance(s, Series) else Series(**s) for s in series]
    if not series:
        raise ValueError("emit_plot_svg needs at least one series")
    tx = np.log10 if logx else (lambda v: v)
    ty = np.log10 if logy else (lambda v: v)
    xs = [tx(np.asarray(s.x, dtype=float)) for s in series]
    ys = [ty(np.asarray(s.y, dtype=float)) for s in series]
    allx = np.concatenate(xs)
    ally = np.concatenate(ys)
    allx = allx[np.isfinite(allx)]
    ally = ally[np.isfinite(ally)]
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 <= x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-size="14">{_esc(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        label = f"{10 ** t:.3g}" if logx else f"{t:.6g}"
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{label}</text>')
    for t in _nice_ticks(y0, y1):
        label = f"{10 ** t:.3g}" if logy else f"{t:.6g}"
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{label}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">'
                   f'{_esc(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2:.2f})">{_esc(ylabel)}</text>')

    for i, (s, sx, sy) in enumerate(zip(series, xs, ys)):
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(sx) & np.isfinite(sy)
        pts = [(px(a), py(b)) for a, b in zip(sx[ok], sy[ok])]
        if s.kind == "scatter":
            out.append(f'<g class="scatter" fill="{color}" fill-opacity="0.6">')
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2"/>' for a, b in pts)
            out.append("</g>")
        else:
            coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 8}" width="12" height="8" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 30}" y="{ly}">{_esc(s.name)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
