"""Static SVG line plots written by hand (polylines and axes only).

Output depends only on the data passed in, so the same trajectory always
produces the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np
from scipy.optimize import brentq

PALETTE = ("#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f", "#ff7f0e")
MAX_POINTS = 1500


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    color: str = "#1f77b4"
    width: float = 1.2
    dash: str | None = None
    label: str | None = None


@dataclass
class Panel:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _thin(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).round().astype(int))
    return x[idx], y[idx]


def _limits(panel: Panel) -> tuple[float, float, float, float]:
    xs = [np.asarray(s.x, float) for s in panel.series if len(s.x)]
    ys = [np.asarray(s.y, float) for s in panel.series if len(s.y)]
    if panel.xlim:
        x0, x1 = panel.xlim
    else:
        x0, x1 = (min(a.min() for a in xs), max(a.max() for a in xs)) if xs else (0.0, 1.0)
    if panel.ylim:
        y0, y1 = panel.ylim
    else:
        y0, y1 = (min(a.min() for a in ys), max(a.max() for a in ys)) if ys else (0.0, 1.0)
        pad = 0.05 * (y1 - y0 or 1.0)
        y0, y1 = y0 - pad, y1 + pad
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    return float(x0), float(x1), float(y0), float(y1)


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 1e-9 * step, step)


def _panel(panel: Panel, ox: float, oy: float, w: float, h: float) -> list[str]:
    left, right, top, bottom = 55.0, 10.0, 24.0, 36.0
    pw, ph = w - left - right, h - top - bottom
    x0, x1, y0, y1 = _limits(panel)

    def sx(v):
        return ox + left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return oy + top + (y1 - v) / (y1 - y0) * ph

    clip = f"clip{int(ox)}_{int(oy)}"
    out = [
        f'<clipPath id="{clip}"><rect x="{_fmt(ox + left)}" y="{_fmt(oy + top)}" '
        f'width="{_fmt(pw)}" height="{_fmt(ph)}"/></clipPath>',
        f'<rect x="{_fmt(ox + left)}" y="{_fmt(oy + top)}" width="{_fmt(pw)}" height="{_fmt(ph)}" '
        'fill="none" stroke="#000" stroke-width="0.8"/>',
        f'<text x="{_fmt(ox + left + pw / 2)}" y="{_fmt(oy + 16)}" text-anchor="middle" '
        f'font-size="13">{escape(panel.title)}</text>',
    ]
    for tv in _ticks(x0, x1):
        X = sx(tv)
        out.append(f'<line x1="{_fmt(X)}" y1="{_fmt(oy + top + ph)}" x2="{_fmt(X)}" y2="{_fmt(oy + top + ph + 4)}" stroke="#000"/>')
        out.append(f'<text x="{_fmt(X)}" y="{_fmt(oy + top + ph + 15)}" text-anchor="middle" font-size="10">{_fmt(tv)}</text>')
    for tv in _ticks(y0, y1):
        Y = sy(tv)
        out.append(f'<line x1="{_fmt(ox + left - 4)}" y1="{_fmt(Y)}" x2="{_fmt(ox + left)}" y2="{_fmt(Y)}" stroke="#000"/>')
        out.append(f'<text x="{_fmt(ox + left - 6)}" y="{_fmt(Y + 3)}" text-anchor="end" font-size="10">{_fmt(tv)}</text>')
    out.append(f'<text x="{_fmt(ox + left + pw / 2)}" y="{_fmt(oy + h - 6)}" text-anchor="middle" font-size="11">{escape(panel.xlabel)}</text>')
    out.append(
        f'<text x="{_fmt(ox + 14)}" y="{_fmt(oy + top + ph / 2)}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 {_fmt(ox + 14)} {_fmt(oy + top + ph / 2)})">{escape(panel.ylabel)}</text>'
    )
    legend_y = oy + top + 12
    for s in panel.series:
        xs, ys = _thin(np.asarray(s.x, float), np.asarray(s.y, float))
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, ys))
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        out.append(
            f'<polyline clip-path="url(#{clip})" fill="none" stroke="{s.color}" '
            f'stroke-width="{_fmt(s.width)}"{dash} points="{pts}"/>'
        )
        if s.label:
            lx = ox + left + pw - 110
            out.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(legend_y - 4)}" x2="{_fmt(lx + 18)}" y2="{_fmt(legend_y - 4)}" stroke="{s.color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{_fmt(lx + 22)}" y="{_fmt(legend_y)}" font-size="10">{escape(s.label)}</text>')
            legend_y += 13
    return out


def render(panels: list[Panel], rows: int, cols: int, width: float = 900, height: float = 700) -> str:
    """Lay panels out row-major on a ``rows x cols`` grid and return SVG text."""
    if len(panels) > rows * cols:
        raise ValueError("more panels than grid cells")
    cw, ch = width / cols, height / rows
    body = []
    for i, panel in enumerate(panels):
        r, c = divmod(i, cols)
        body.extend(_panel(panel, c * cw, r * ch, cw, ch))
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family="sans-serif">\n'
        f'<rect width="100%" height="100%" fill="#fff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def write(path, panels: list[Panel], rows: int, cols: int, **kw) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(render(panels, rows, cols, **kw))


# ---------------------------------------------------------------------------
# Figure layouts
# ---------------------------------------------------------------------------


def expanded_level(alpha, schedule, d_inf: float) -> float:
    """The value ``h*`` with ``h* + gamma_T(h*) = 0`` (boundary of the expanded set)."""
    from .cert import gamma_tissf

    if schedule is None or d_inf == 0:
        return 0.0

    def fun(h):
        return h + float(gamma_tissf(alpha, schedule, h, d_inf))

    lo = -1.0
    while fun(lo) > 0:
        lo *= 2
        if lo < -1e6:
            raise ValueError("expanded set boundary not bracketed")
    return float(brentq(fun, lo, 0.0, xtol=1e-12))


def phase_panel(title, trajs, alpha=None, schedule=None, d_inf=0.0, lim=3.0) -> Panel:
    """Double-integrator phase plane with the level lines ``x1 - x2 = c``."""
    grid = np.array([-lim, lim])
    series = [Series(grid, grid, "#000", 1.5, label="boundary of C")]
    if schedule is not None and d_inf > 0:
        c = expanded_level(alpha, schedule, d_inf)
        series.append(Series(grid + c, grid, "#d62728", 1.5, "6,3", label="expanded set"))
    for i, tr in enumerate(trajs):
        series.append(Series(tr.x[:, 0], tr.x[:, 1], PALETTE[i % len(PALETTE)], 1.0))
    return Panel(title, "x1", "x2", series, (-lim, lim), (-lim, lim))


def figure1(panels: list[Panel]) -> str:
    return render(panels, 2, 2, 900, 800)


def truck_panels(runs: dict, colors: dict | None = None) -> list[Panel]:
    """Four rows: headway, velocities, barrier value and applied input."""
    colors = colors or {}
    rows = [
        Panel("(a) distance", "t [s]", "D [m]"),
        Panel("(b) velocities", "t [s]", "v [m/s]"),
        Panel("(c) safety function", "t [s]", "h [m]"),
        Panel("(d) input", "t [s]", "u [m/s^2]"),
    ]
    lead_drawn = False
    for i, (name, tr) in enumerate(runs.items()):
        col = colors.get(name, PALETTE[i % len(PALETTE)])
        rows[0].series.append(Series(tr.t, tr.x[:, 0], col, label=name))
        rows[1].series.append(Series(tr.t, tr.x[:, 1], col, label=name))
        if not lead_drawn:
            rows[1].series.append(Series(tr.t, tr.x[:, 2], "#000", 1.0, "4,3", label="lead"))
            lead_drawn = True
        rows[2].series.append(Series(tr.t, tr.h, col, label=name))
        rows[3].series.append(Series(tr.t, tr.u_applied[:, 0], col, label=name))
    t_end = max(float(tr.t[-1]) for tr in runs.values())
    rows[2].series.append(Series(np.array([0.0, t_end]), np.zeros(2), "#000", 0.8, "2,2"))
    return rows


def figure2(runs: dict, colors: dict | None = None) -> str:
    return render(truck_panels(runs, colors), 4, 1, 700, 1000)
