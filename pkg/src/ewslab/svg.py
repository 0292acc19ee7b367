"""Minimal SVG line plots and heat maps (no plotting dependencies)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 480, 320
PAD_L, PAD_R, PAD_T, PAD_B = 64, 16, 28, 44


def _frame(title: str, xlabel: str, ylabel: str, xlim, ylim) -> list[str]:
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{PAD_L + pw / 2}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{PAD_T + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {PAD_T + ph / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xlim[0] + frac * (xlim[1] - xlim[0])
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        out.append(f'<text x="{PAD_L + frac * pw:.1f}" y="{PAD_T + ph + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{PAD_L - 4}" y="{PAD_T + (1 - frac) * ph + 4:.1f}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    return out


def _lim(v):
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """``series`` maps a legend label to an ``(x, y)`` pair of arrays."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    xlim, ylim = _lim(xs), _lim(ys)
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    for i, (label, (x, y)) in enumerate(series.items()):
        px = PAD_L + (np.asarray(x, float) - xlim[0]) / (xlim[1] - xlim[0]) * pw
        py = PAD_T + (1 - (np.asarray(y, float) - ylim[0]) / (ylim[1] - ylim[0])) * ph
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        color = palette[i % len(palette)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{PAD_L + 6}" y="{PAD_T + 14 + 13 * i}" font-size="11" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sign_heatmap(signs, xgrid, ygrid, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Cells coloured red (-1), blue (+1) or grey (0); ``signs[i_y, i_x]``."""
    colors = {-1: "#d62728", 0: "#bbbbbb", 1: "#1f77b4"}
    s = np.asarray(signs)
    xlim, ylim = _lim(xgrid), _lim(ygrid)
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    ny, nx = s.shape
    cw, ch = pw / nx, ph / ny
    for i in range(ny):
        for j in range(nx):
            out.append(
                f'<rect x="{PAD_L + j * cw:.2f}" y="{PAD_T + (ny - 1 - i) * ch:.2f}" '
                f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{colors[int(s[i, j])]}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
