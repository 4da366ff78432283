"""Self-contained SVG emission for spectra, counting functions and
eigenfunction heatmaps.

Hand-rolled on purpose: byte-identical output across runs and platforms,
no rasterizer or plotting dependency.  All numbers are printed with fixed
precision.
"""

from __future__ import annotations

import math

from .resistance import ParameterError

WIDTH = 640
HEIGHT = 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 20, 28, 48

KIND_STEP = "step"
KIND_LOGLOG = "loglog"
KIND_WEYL = "weyl"
KIND_HEATMAP = "eigfun-heatmap"


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{title}</text>',
    ]


def _axes(x_label: str, y_label: str) -> list:
    x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
    x1, y1 = WIDTH - MARGIN_R, MARGIN_T
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{(y0 + y1) / 2}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 {(y0 + y1) / 2})">{y_label}</text>',
    ]


class _Frame:
    def __init__(self, xs, ys, logx=False, logy=False):
        if logx:
            xs = [math.log10(x) for x in xs]
        if logy:
            ys = [math.log10(y) for y in ys]
        self.logx, self.logy = logx, logy
        self.x_lo, self.x_hi = min(xs), max(xs)
        self.y_lo, self.y_hi = min(ys), max(ys)
        if self.x_hi == self.x_lo:
            self.x_hi = self.x_lo + 1.0
        if self.y_hi == self.y_lo:
            self.y_hi = self.y_lo + 1.0

    def px(self, x):
        if self.logx:
            x = math.log10(x)
        t = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN_L + t * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y):
        if self.logy:
            y = math.log10(y)
        t = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)

    def ticks(self, parts):
        out = []
        for i in range(parts + 1):
            xv = self.x_lo + i * (self.x_hi - self.x_lo) / parts
            yv = self.y_lo + i * (self.y_hi - self.y_lo) / parts
            xl = f"1e{_fmt(xv)}" if self.logx else _fmt(xv)
            yl = f"1e{_fmt(yv)}" if self.logy else _fmt(yv)
            px = MARGIN_L + i * (WIDTH - MARGIN_L - MARGIN_R) / parts
            py = HEIGHT - MARGIN_B - i * (HEIGHT - MARGIN_T - MARGIN_B) / parts
            out.append(f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN_B + 16}" '
                       f'font-family="sans-serif" font-size="10" '
                       f'text-anchor="middle">{xl}</text>')
            out.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(py + 3)}" '
                       f'font-family="sans-serif" font-size="10" '
                       f'text-anchor="end">{yl}</text>')
        return out


def _step_path(frame, xs, ys):
    # staircase: horizontal run to the next jump, then vertical rise
    pts = [f"M {_fmt(frame.px(xs[0]))} {_fmt(frame.py(ys[0]))}"]
    for i in range(1, len(xs)):
        pts.append(f"L {_fmt(frame.px(xs[i]))} {_fmt(frame.py(ys[i - 1]))}")
        pts.append(f"L {_fmt(frame.px(xs[i]))} {_fmt(frame.py(ys[i]))}")
    return " ".join(pts)


def diverging_color(t: float) -> str:
    """Symmetric blue-white-red map for t in [-1, 1]."""
    t = max(-1.0, min(1.0, t))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"rgb({r},{g},{b})"


def render_svg(series, kind: str, title: str = "", annotations=None) -> bytes:
    """Render one figure to SVG bytes.

    series for step/loglog/weyl: (xs, ys); for eigfun-heatmap:
    (coords, values, edges) with coords a list of (x, y) per vertex.
    """
    if kind == KIND_STEP:
        xs, ys = series
        if len(xs) == 0:
            raise ParameterError("empty series")
        frame = _Frame(xs, ys)
        body = _header(title) + _axes("x", "N(x)") + frame.ticks(4)
        body.append(f'<path d="{_step_path(frame, list(xs), list(ys))}" '
                    f'fill="none" stroke="steelblue" stroke-width="1.5"/>')
    elif kind in (KIND_LOGLOG, KIND_WEYL):
        xs, ys = series
        if len(xs) == 0:
            raise ParameterError("empty series")
        logy = kind == KIND_LOGLOG
        frame = _Frame(xs, ys, logx=True, logy=logy)
        ylab = "N(x)" if logy else "N(x) / x^(d_s/2)"
        body = _header(title) + _axes("x (log)", ylab) + frame.ticks(4)
        pts = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}"
                       for x, y in zip(xs, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" '
                    f'stroke-width="1.2"/>')
        if kind == KIND_LOGLOG and annotations and "slope" in annotations:
            slope = annotations["slope"]
            x0, x1 = min(xs), max(xs)
            y0 = annotations.get("anchor", ys[0])
            y1 = y0 * (x1 / x0) ** slope
            body.append(f'<line x1="{_fmt(frame.px(x0))}" y1="{_fmt(frame.py(y0))}" '
                        f'x2="{_fmt(frame.px(x1))}" y2="{_fmt(frame.py(y1))}" '
                        f'stroke="crimson" stroke-dasharray="6 3"/>')
            body.append(f'<text x="{WIDTH - MARGIN_R - 6}" y="{MARGIN_T + 14}" '
                        f'font-family="sans-serif" font-size="12" text-anchor="end" '
                        f'fill="crimson">slope {slope:.5f}</text>')
    elif kind == KIND_HEATMAP:
        coords, values, edges = series
        if len(coords) == 0:
            raise ParameterError("empty series")
        xs = [p[0] for p in coords]
        ys = [p[1] for p in coords]
        frame = _Frame(xs, ys)
        peak = max(abs(v) for v in values) or 1.0
        body = _header(title)
        for (u, v) in edges:
            body.append(f'<line x1="{_fmt(frame.px(xs[u]))}" y1="{_fmt(frame.py(ys[u]))}" '
                        f'x2="{_fmt(frame.px(xs[v]))}" y2="{_fmt(frame.py(ys[v]))}" '
                        f'stroke="#cccccc" stroke-width="0.6"/>')
        for (x, y), val in zip(coords, values):
            body.append(f'<circle cx="{_fmt(frame.px(x))}" cy="{_fmt(frame.py(y))}" r="3" '
                        f'fill="{diverging_color(val / peak)}" stroke="#555555" '
                        f'stroke-width="0.3"/>')
    else:
        raise ParameterError(f"unknown plot kind {kind!r}")
    body.append("</svg>")
    return ("\n".join(body) + "\n").encode("ascii")
