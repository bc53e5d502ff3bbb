"""CSV, JSON and SVG writers with deterministic byte output."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

REGIME_COLORS = {
    "SHD": "#d95f02",
    "MR": "#7570b3",
    "SLD": "#1b9e77",
    "UNRESOLVED": "#bdbdbd",
}
CURVE_COLORS = {
    "kappa1": "#e7298a",
    "kappa2": "#000000",
    "kappa3": "#1f78b4",
    "kappa4": "#a6761d",
}
SERIES_COLORS = ("#1b9e77", "#d95f02", "#7570b3")


def fmt(value) -> str:
    """Number formatting shared by every output: 12 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "NA"
        return format(v, ".12g")
    return str(value)


def round_floats(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else float(format(v, ".12g"))
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Mapping):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [round_floats(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8", newline="\n")


def csv_text(header: Sequence[str], rows: Iterable[Sequence], meta: Mapping | None = None) -> str:
    """Comma-separated text; ``meta`` becomes one leading ``# {json}`` line."""
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(round_floats(meta), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header, rows, meta=None) -> None:
    Path(path).write_text(csv_text(header, rows, meta), encoding="utf-8", newline="\n")


def read_csv(path: Path) -> tuple[dict | None, list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`: (meta, header, rows as strings)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = None
    if lines and lines[0].startswith("# "):
        meta = json.loads(lines[0][2:])
        lines = lines[1:]
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


# --- SVG -------------------------------------------------------------------

_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 30, 50


def _n(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def px(self, x):
        return _LEFT + (x - self.x0) / (self.x1 - self.x0) * (_W - _LEFT - _RIGHT)

    def py(self, y):
        return _H - _BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (_H - _TOP - _BOTTOM)


def _axes(frame: _Frame, xlabel: str, ylabel: str, title: str) -> list[str]:
    out = [
        f'<rect x="{_LEFT}" y="{_TOP}" width="{_W - _LEFT - _RIGHT}" '
        f'height="{_H - _TOP - _BOTTOM}" fill="none" stroke="#000" stroke-width="1"/>'
    ]
    for i in range(5):
        xv = frame.x0 + i * (frame.x1 - frame.x0) / 4
        yv = frame.y0 + i * (frame.y1 - frame.y0) / 4
        out.append(f'<text x="{_n(frame.px(xv))}" y="{_H - _BOTTOM + 16}" '
                   f'text-anchor="middle" font-size="11">{xv:.3g}</text>')
        out.append(f'<text x="{_LEFT - 6}" y="{_n(frame.py(yv) + 4)}" '
                   f'text-anchor="end" font-size="11">{yv:.3g}</text>')
    out.append(f'<text x="{(_W + _LEFT - _RIGHT) / 2:.2f}" y="{_H - 12}" '
               f'text-anchor="middle" font-size="13">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{(_H + _TOP - _BOTTOM) / 2:.2f}" text-anchor="middle" '
               f'font-size="13" transform="rotate(-90 16 {(_H + _TOP - _BOTTOM) / 2:.2f})">'
               f'{_esc(ylabel)}</text>')
    out.append(f'<text x="{_W / 2:.2f}" y="18" text-anchor="middle" font-size="14">'
               f'{_esc(title)}</text>')
    return out


def _document(body: list[str], meta: Mapping | None = None) -> str:
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}" '
            f'width="{_W}" height="{_H}">']
    if meta is not None:
        head.append("<desc>" + _esc(json.dumps(round_floats(meta), sort_keys=True)) + "</desc>")
    return "\n".join([*head, '<rect width="100%" height="100%" fill="#fff"/>', *body, "</svg>"]) + "\n"


def _polyline(frame: _Frame, xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{_n(frame.px(x))},{_n(frame.py(y))}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def trajectory_svg(t, x, title: str = "", meta: Mapping | None = None) -> str:
    """Line plot of each opinion against time."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    pad = 0.05 * (hi - lo or 1.0)
    frame = _Frame((float(t[0]), float(t[-1])), (lo - pad, hi + pad))
    body = _axes(frame, "t", "opinion", title)
    for i in range(x.shape[1]):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        body.append(_polyline(frame, t, x[:, i], color))
        body.append(f'<text x="{_W - _RIGHT - 40}" y="{_TOP + 16 + 14 * i}" font-size="12" '
                    f'fill="{color}">x{i + 1}</text>')
    return _document(body, meta)


def diagram_svg(dmu_axis, kappa_axis, labels, curves=None, title: str = "",
                meta: Mapping | None = None) -> str:
    """Regime heatmap with one rectangle per cell and optional boundary overlays.

    ``labels[i][j]`` is the regime string at (dmu_axis[i], kappa_axis[j]);
    ``curves`` maps a curve name to (dmu values, kappa values).
    """
    def edges(axis):
        axis = [float(v) for v in axis]
        if len(axis) == 1:
            return [axis[0] - 0.5, axis[0] + 0.5]
        mids = [(a + b) / 2 for a, b in zip(axis, axis[1:])]
        return [axis[0] - (mids[0] - axis[0])] + mids + [axis[-1] + (axis[-1] - mids[-1])]

    ex, ey = edges(dmu_axis), edges(kappa_axis)
    frame = _Frame((ex[0], ex[-1]), (ey[0], ey[-1]))
    body = []
    for i in range(len(dmu_axis)):
        for j in range(len(kappa_axis)):
            kind = str(labels[i][j]).split("(")[0]
            color = REGIME_COLORS.get(kind, REGIME_COLORS["UNRESOLVED"])
            x0, x1 = frame.px(ex[i]), frame.px(ex[i + 1])
            y0, y1 = frame.py(ey[j + 1]), frame.py(ey[j])
            body.append(f'<rect x="{_n(x0)}" y="{_n(y0)}" width="{_n(x1 - x0)}" '
                        f'height="{_n(y1 - y0)}" fill="{color}" stroke="none"/>')
    body.append(f'<clipPath id="plot"><rect x="{_LEFT}" y="{_TOP}" '
                f'width="{_W - _LEFT - _RIGHT}" height="{_H - _TOP - _BOTTOM}"/></clipPath>')
    for name, (xs, ys) in sorted((curves or {}).items()):
        if len(xs) < 2:
            continue
        color = CURVE_COLORS.get(name, "#000000")
        body.append(f'<g clip-path="url(#plot)">{_polyline(frame, xs, ys, color, 2.0)}</g>')
    body.extend(_axes(frame, "delta_mu", "kappa", title))
    legend = list(REGIME_COLORS.items()) + [(k, v) for k, v in sorted(CURVE_COLORS.items())
                                             if curves and k in curves]
    for n, (name, color) in enumerate(legend):
        y = _TOP + 8 + 14 * n
        body.append(f'<rect x="{_W - _RIGHT - 110}" y="{y}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{_W - _RIGHT - 96}" y="{y + 9}" font-size="11">{_esc(name)}</text>')
    return _document(body, meta)
