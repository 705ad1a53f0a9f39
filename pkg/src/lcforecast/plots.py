"""Deterministic SVG line plots of learning curves and their extrapolations.

Two stacked panels per figure: linear axes on top, log-log below.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .curvefit import FitResult, Forecast, LearningCurve, gompertz

WIDTH = 640
PANEL_H = 260
MARGIN = dict(left=60, right=20, top=34, bottom=40)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Axes:
    def __init__(self, x0: float, y0: float, w: float, h: float, xlim, ylim, log: bool):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.log = log
        self.xlim = tuple(self._tx(v) for v in xlim)
        self.ylim = tuple(self._ty(v) for v in ylim)

    def _tx(self, v: float) -> float:
        return math.log10(v) if self.log else v

    def _ty(self, v: float) -> float:
        return math.log10(v) if self.log else v

    def px(self, x: float, y: float) -> tuple[float, float]:
        (a, b), (c, d) = self.xlim, self.ylim
        fx = (self._tx(x) - a) / (b - a) if b > a else 0.5
        fy = (self._ty(y) - c) / (d - c) if d > c else 0.5
        return self.x0 + fx * self.w, self.y0 + self.h - fy * self.h

    def inside(self, x: float, y: float) -> bool:
        if self.log and (x <= 0 or y <= 0):
            return False
        return True

    def polyline(self, xs, ys, color: str, dashed: bool = False, width: float = 1.6) -> str:
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (self.px(x, y) for x, y in zip(xs, ys) if self.inside(x, y)))
        if not pts:
            return ""
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        return f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} points="{pts}"/>'

    def points(self, xs, ys, color: str) -> str:
        out = []
        for x, y in zip(xs, ys):
            if self.inside(x, y):
                cx, cy = self.px(x, y)
                out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.6" fill="{color}"/>')
        return "".join(out)

    def frame(self, title: str, xlabel: str, ylabel: str) -> str:
        parts = [
            f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" height="{_fmt(self.h)}" '
            f'fill="none" stroke="#444"/>',
            f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 - 10)}" text-anchor="middle" '
            f'font-size="13">{escape(title)}</text>',
            f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 + self.h + 32)}" text-anchor="middle" '
            f'font-size="11">{escape(xlabel)}</text>',
            f'<text x="{_fmt(self.x0 - 44)}" y="{_fmt(self.y0 + self.h / 2)}" text-anchor="middle" font-size="11" '
            f'transform="rotate(-90 {_fmt(self.x0 - 44)} {_fmt(self.y0 + self.h / 2)})">{escape(ylabel)}</text>',
        ]
        for axis in ("x", "y"):
            lo, hi = self.xlim if axis == "x" else self.ylim
            for v in _ticks(lo, hi):
                label = _tick_label(v, self.log)
                if axis == "x":
                    px = self.x0 + (v - lo) / (hi - lo) * self.w if hi > lo else self.x0
                    py = self.y0 + self.h
                    parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(py)}" x2="{_fmt(px)}" y2="{_fmt(py + 4)}" stroke="#444"/>')
                    parts.append(f'<text x="{_fmt(px)}" y="{_fmt(py + 15)}" text-anchor="middle" font-size="10">{label}</text>')
                else:
                    py = self.y0 + self.h - (v - lo) / (hi - lo) * self.h if hi > lo else self.y0
                    parts.append(f'<line x1="{_fmt(self.x0 - 4)}" y1="{_fmt(py)}" x2="{_fmt(self.x0)}" y2="{_fmt(py)}" stroke="#444"/>')
                    parts.append(f'<text x="{_fmt(self.x0 - 6)}" y="{_fmt(py + 3)}" text-anchor="end" font-size="10">{label}</text>')
        return "".join(parts)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


def _tick_label(v: float, log: bool) -> str:
    if log:
        x = 10**v
        return f"{x:.3g}"
    return f"{v:.4g}"


def _svg(body: list[str], height: int) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(b for b in body if b) + "\n</svg>\n"
    )


def _panels(n_extra: int = 0):
    inner_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    inner_h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    tops = [MARGIN["top"], PANEL_H + MARGIN["top"]]
    return inner_w, inner_h, tops


def curve_figure(
    curve: LearningCurve,
    fit: FitResult | None,
    forecast: Forecast | None,
    title: str | None = None,
) -> str:
    """Measured points, fitted curve and extrapolation, linear and log-log."""
    inner_w, inner_h, tops = _panels()
    t = np.asarray(curve.times)
    v = np.asarray(curve.values)
    t_max = float(forecast.extrapolated.times[-1]) if forecast is not None else float(t.max())
    y_hi = max(1.0, float(v.max()))
    body = []
    for panel, log in ((0, False), (1, True)):
        if log:
            y_lo = max(1e-3, float(np.min(v[v > 0])) * 0.8) if np.any(v > 0) else 1e-3
            ax = _Axes(MARGIN["left"], tops[panel], inner_w, inner_h, (max(t.min(), 1e-3), max(t_max, t.min() * 1.01 + 1e-3)), (y_lo, y_hi), True)
        else:
            ax = _Axes(MARGIN["left"], tops[panel], inner_w, inner_h, (0.0, t_max), (0.0, y_hi), False)
        label = title or curve.task
        body.append(ax.frame(f"{label} ({'log-log' if log else 'linear'})", f"time ({curve.unit}s)", curve.metric))
        if forecast is not None:
            ex = forecast.extrapolated_loglog if log else forecast.extrapolated
            body.append(ax.polyline(ex.times, ex.values, PALETTE[1], dashed=True))
        if fit is not None:
            tt = np.geomspace(max(t.min(), 1e-3), t.max(), 80) if log else np.linspace(t.min(), t.max(), 80)
            body.append(ax.polyline(tt, gompertz(fit.params, tt), PALETTE[0]))
        body.append(ax.points(t, v, "#222"))
    return _svg(body, 2 * PANEL_H)


def extrapolation_figure(forecasts: Sequence[Forecast], title: str = "Extrapolated learning curves") -> str:
    """All tasks' extrapolations on common axes (time in days)."""
    inner_w, inner_h, tops = _panels()
    if not forecasts:
        return _svg([], 2 * PANEL_H)
    scale = {"day": 1.0, "week": 7.0}
    series = [
        (f.task, np.asarray(f.extrapolated.times) * scale[f.unit], f.extrapolated.values,
         np.asarray(f.extrapolated_loglog.times) * scale[f.unit], f.extrapolated_loglog.values)
        for f in forecasts
    ]
    t_max = max(float(s[1][-1]) for s in series)
    t_min = min(float(s[3][0]) for s in series)
    y_hi = max(1.0, max(float(np.max(s[2])) for s in series))
    y_lo = max(1e-3, min(float(np.min(s[4][s[4] > 0])) for s in series if np.any(s[4] > 0)) * 0.8)
    body = []
    for panel, log in ((0, False), (1, True)):
        if log:
            ax = _Axes(MARGIN["left"], tops[panel], inner_w, inner_h, (t_min, t_max), (y_lo, y_hi), True)
        else:
            ax = _Axes(MARGIN["left"], tops[panel], inner_w, inner_h, (0.0, t_max), (0.0, y_hi), False)
        body.append(ax.frame(f"{title} ({'log-log' if log else 'linear'})", "time (days)", "accuracy / AUC"))
        for i, (task, lt, lv, gt, gv) in enumerate(series):
            color = PALETTE[i % len(PALETTE)]
            body.append(ax.polyline(gt, gv, color) if log else ax.polyline(lt, lv, color))
            if panel == 0:
                lx = MARGIN["left"] + 8
                ly = tops[0] + 14 + 13 * i
                body.append(f'<text x="{lx}" y="{ly}" font-size="10" fill="{color}">{escape(task)}</text>')
    return _svg(body, 2 * PANEL_H)
