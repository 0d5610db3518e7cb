"""Minimal self-contained SVG charts.

Line and scatter charts good enough for loss curves and trade-off plots,
with nothing beyond the standard library. Output is deterministic for
identical inputs, so re-rendered reports stay byte-identical.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from html import escape

from .errors import InputError

PALETTE = ("#4063d8", "#d8404f", "#2a9d62", "#c78522", "#7a4fd8", "#3fa7c4")

_MARKERS = ("circle", "square", "diamond", "triangle", "cross", "plus")


@dataclass
class Series:
    """One named line or point group."""

    name: str
    xs: list[float]
    ys: list[float]
    labels: list[str] = field(default_factory=list)  # optional per-point hover text

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.ys):
            raise InputError(f"series {self.name!r}: {len(self.xs)} xs vs {len(self.ys)} ys")
        if not self.xs:
            raise InputError(f"series {self.name!r} is empty")
        bad = [v for v in list(self.xs) + list(self.ys) if not math.isfinite(v)]
        if bad:
            raise InputError(f"series {self.name!r} has non-finite values")


def _fmt(v: float) -> str:
    # trim trailing zeros so coordinates do not depend on float repr quirks
    s = f"{v:.2f}"
    return s.rstrip("0").rstrip(".") if "." in s else s


def _tick_value(v: float) -> str:
    s = f"{v:.6g}"
    return s


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(1, target)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if span / step <= target + 0.5:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


def _chart(
    series: list[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    width: int,
    height: int,
    draw_lines: bool,
) -> str:
    if not series:
        raise InputError("chart needs at least one series")
    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for y in s.ys]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xpad = 0.05 * (xhi - xlo)
    ypad = 0.08 * (yhi - ylo)
    xlo, xhi = xlo - xpad, xhi + xpad
    ylo, yhi = ylo - ypad, yhi + ypad

    left, right, top, bottom = 62, 16, 34, 46
    pw = width - left - right
    ph = height - top - bottom

    def sx(v: float) -> float:
        return left + (v - xlo) / (xhi - xlo) * pw

    def sy(v: float) -> float:
        return top + (yhi - v) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for t in _nice_ticks(xlo + xpad, xhi - xpad):
        px = sx(t)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{top}" x2="{_fmt(px)}" y2="{top + ph}" stroke="#ddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{top + ph + 16}" text-anchor="middle" font-size="11">{_tick_value(t)}</text>'
        )
    for t in _nice_ticks(ylo + ypad, yhi - ypad):
        py = sy(t)
        out.append(
            f'<line x1="{left}" y1="{_fmt(py)}" x2="{left + pw}" y2="{_fmt(py)}" stroke="#ddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{left - 6}" y="{_fmt(py + 4)}" text-anchor="end" font-size="11">{_tick_value(t)}</text>'
        )
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444" stroke-width="1"/>'
    )
    out.append(
        f'<text x="{left + pw / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="14" y="{top + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {top + ph / 2:.0f})">{escape(ylabel)}</text>'
    )

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(sx(x), sy(y)) for x, y in zip(s.xs, s.ys)]
        if draw_lines and len(pts) > 1:
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        marker = _MARKERS[i % len(_MARKERS)]
        for j, (px, py) in enumerate(pts):
            label = s.labels[j] if j < len(s.labels) else ""
            tip = f"<title>{escape(label)}</title>" if label else ""
            out.append(_glyph(marker, px, py, color, tip))

    ly = top + 14
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        lx = left + pw - 110
        out.append(_glyph(_MARKERS[i % len(_MARKERS)], lx, ly - 4, color, ""))
        out.append(
            f'<text x="{lx + 10}" y="{ly}" font-size="11">{escape(s.name)}</text>'
        )
        ly += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _glyph(marker: str, px: float, py: float, color: str, tip: str) -> str:
    x, y = _fmt(px), _fmt(py)
    if marker == "circle":
        return f'<circle cx="{x}" cy="{y}" r="3.2" fill="{color}">{tip}</circle>'
    if marker == "square":
        return (
            f'<rect x="{_fmt(px - 2.8)}" y="{_fmt(py - 2.8)}" width="5.6" height="5.6" '
            f'fill="{color}">{tip}</rect>'
        )
    if marker == "diamond":
        return (
            f'<path d="M {_fmt(px)} {_fmt(py - 4)} L {_fmt(px + 4)} {_fmt(py)} '
            f'L {_fmt(px)} {_fmt(py + 4)} L {_fmt(px - 4)} {_fmt(py)} Z" fill="{color}">{tip}</path>'
        )
    if marker == "triangle":
        return (
            f'<path d="M {_fmt(px)} {_fmt(py - 3.8)} L {_fmt(px + 3.6)} {_fmt(py + 3)} '
            f'L {_fmt(px - 3.6)} {_fmt(py + 3)} Z" fill="{color}">{tip}</path>'
        )
    if marker == "cross":
        return (
            f'<path d="M {_fmt(px - 3)} {_fmt(py - 3)} L {_fmt(px + 3)} {_fmt(py + 3)} '
            f'M {_fmt(px - 3)} {_fmt(py + 3)} L {_fmt(px + 3)} {_fmt(py - 3)}" '
            f'stroke="{color}" stroke-width="1.8" fill="none">{tip}</path>'
        )
    return (
        f'<path d="M {_fmt(px - 3.4)} {_fmt(py)} L {_fmt(px + 3.4)} {_fmt(py)} '
        f'M {_fmt(px)} {_fmt(py - 3.4)} L {_fmt(px)} {_fmt(py + 3.4)}" '
        f'stroke="{color}" stroke-width="1.8" fill="none">{tip}</path>'
    )


def line_chart(
    series: list[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Polyline chart with point markers; one color per series."""
    return _chart(series, title, xlabel, ylabel, width, height, draw_lines=True)


def scatter_chart(
    series: list[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Markers only, for point clouds like loss-vs-forgetting."""
    return _chart(series, title, xlabel, ylabel, width, height, draw_lines=False)
