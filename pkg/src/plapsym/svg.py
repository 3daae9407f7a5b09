"""Minimal static SVG line plots (fixed 800x600 viewBox, no timestamps)."""

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=50, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def _fmt(v):
    return f"{v:.3g}"


def line_plot(series, title, xlabel, ylabel, logx=False, logy=False, markers=False):
    """``series`` is a list of (label, x, y); non-finite or nonpositive-on-log points are dropped."""
    cleaned = []
    for label, x, y in series:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        x, y = x[ok], y[ok]
        cleaned.append((label, np.log10(x) if logx else x, np.log10(y) if logy else y))
    allx = np.concatenate([c[1] for c in cleaned] + [np.zeros(0)])
    ally = np.concatenate([c[2] for c in cleaned] + [np.zeros(0)])
    if len(allx) == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 <= x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
           f'width="{WIDTH}" height="{HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="18">{escape(title)}</text>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        label = _fmt(10 ** v) if logx else _fmt(v)
        out.append(f'<text x="{sx(v):.1f}" y="{HEIGHT - MARGIN["bottom"] + 20}" '
                   f'text-anchor="middle" font-size="12">{label}</text>')
    for v in _ticks(y0, y1):
        label = _fmt(10 ** v) if logy else _fmt(v)
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{sy(v) + 4:.1f}" '
                   f'text-anchor="end" font-size="12">{label}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="14">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 20 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, x, y) in enumerate(cleaned):
        color = COLORS[i % len(COLORS)]
        if len(x):
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
            if markers:
                out += [f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="{color}"/>'
                        for a, b in zip(x, y)]
        ly = MARGIN["top"] + 20 + 18 * i
        out.append(f'<line x1="{WIDTH - 200}" y1="{ly}" x2="{WIDTH - 175}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - 170}" y="{ly + 4}" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
