"""Regret curves as plain SVG text (polylines and tick labels, no renderer)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from invopt.sim import ExperimentTrace

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
MAX_POINTS = 400  # per polyline, sampled log-uniformly in t


@dataclass(frozen=True)
class Series:
    label: str
    t: np.ndarray
    regret: np.ndarray
    surrogate: np.ndarray


def series_from_trace(trace: ExperimentTrace, label: str | None = None) -> Series:
    t = np.arange(1, trace.T + 1, dtype=float)
    if label is None:
        label = f"{trace.header.get('learner', '?')} n={trace.n} seed={trace.seed}"
    return Series(label, t, trace.running["R"].copy(), trace.running["Rtilde"].copy())


def _subsample(n: int) -> np.ndarray:
    if n <= MAX_POINTS:
        return np.arange(n)
    idx = np.unique(np.round(np.geomspace(1, n, MAX_POINTS)).astype(int) - 1)
    return idx


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks, v = [], start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def regret_svg(series: list[Series], title: str = "cumulative regret") -> str:
    """Line chart of R_T (solid) and the surrogate regret (dashed) against t on a log axis."""
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    nonempty = [s for s in series if len(s.t)]
    tmax = max((float(s.t[-1]) for s in nonempty), default=10.0)
    xhi = max(1.0, math.log10(max(tmax, 10.0)))
    vals = np.concatenate([np.concatenate([s.regret, s.surrogate]) for s in nonempty]) if nonempty else np.zeros(1)
    ylo, yhi = min(0.0, float(vals.min())), max(1.0, float(vals.max()))
    yhi += 0.05 * (yhi - ylo)

    def X(t):
        return LEFT + pw * (np.log10(t) / xhi)

    def Y(v):
        return TOP + ph * (1.0 - (v - ylo) / (yhi - ylo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{LEFT + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(int(math.floor(xhi)) + 1):
        x = X(10.0**k)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">1e{k}</text>')
    for v in _nice_ticks(ylo, yhi):
        y = Y(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_num(v)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">round t</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">regret</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if len(s.t):
            idx = _subsample(len(s.t))
            for arr, dash in ((s.regret, ""), (s.surrogate, ' stroke-dasharray="5,3"')):
                pts = " ".join(f"{X(t):.2f},{Y(v):.2f}" for t, v in zip(s.t[idx], arr[idx]))
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = TOP + 14 + 18 * i
        lx = LEFT + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 25}" y="{ly}">{escape(s.label)}</text>')
    if series:
        ly = TOP + 14 + 18 * len(series) + 6
        out.append(f'<text x="{LEFT + pw + 10}" y="{ly}" fill="#555">solid R, dashed R~</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
