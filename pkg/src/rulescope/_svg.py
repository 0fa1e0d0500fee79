"""Minimal deterministic SVG builders for heatmaps, elbow plots, and networks.

Hand-rolled so that identical inputs always produce identical bytes.
"""

from __future__ import annotations

import math

# Qualitative palette for cluster bands (cycled when clusters exceed it).
PALETTE = [
    "#4363d8", "#e6194b", "#3cb44b", "#ffe119", "#f58231", "#911eb4",
    "#46f0f0", "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff",
    "#9a6324", "#fffac8", "#800000", "#aaffc3", "#808000", "#ffd8b1",
    "#000075", "#808080",
]

_ANCHORS = ((13, 8, 135), (204, 71, 120), (240, 249, 33))  # dark, mid, bright


def _f(x: float) -> str:
    return f"{x:.2f}"


def heat_color(v: float) -> str:
    """Three-anchor gradient, linear in v over [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    if v <= 0.5:
        a, b, t = _ANCHORS[0], _ANCHORS[1], v * 2.0
    else:
        a, b, t = _ANCHORS[1], _ANCHORS[2], (v - 0.5) * 2.0
    r = round(a[0] + (b[0] - a[0]) * t)
    g = round(a[1] + (b[1] - a[1]) * t)
    bl = round(a[2] + (b[2] - a[2]) * t)
    return f"#{r:02x}{g:02x}{bl:02x}"


def cluster_color(label: int) -> str:
    return PALETTE[label % len(PALETTE)]


class Canvas:
    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
            f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">',
            '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        ]

    def rect(self, x, y, w, h, fill):
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0):
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{stroke}" stroke-width="{_f(width)}"/>'
        )

    def circle(self, cx, cy, r, fill, stroke="none"):
        self.parts.append(
            f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def polyline(self, points, stroke="#333333", width=1.5):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{_f(width)}"/>'
        )

    def text(self, x, y, s, size=10, anchor="start", rotate=None, fill="#000000"):
        esc = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        transform = ""
        if rotate is not None:
            transform = f' transform="rotate({_f(rotate)} {_f(x)} {_f(y)})"'
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-size="{_f(size)}" '
            f'font-family="monospace" text-anchor="{anchor}" fill="{fill}"{transform}>{esc}</text>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def heatmap_svg(
    matrix,
    row_order,
    col_order,
    col_labels,
    found_labels=None,
    true_labels=None,
    title: str = "",
) -> str:
    """Cell-per-value heatmap with optional cluster bands on the left.

    Rows and columns are drawn in the given orders; ``found_labels`` and
    ``true_labels`` are per-row (unordered) label sequences.
    """
    m = len(row_order)
    p = len(col_order)
    cell_w = min(28.0, max(4.0, 880.0 / p))
    cell_h = min(18.0, max(0.8, 620.0 / m))
    band_w = 12.0
    gap = 4.0
    left = 10.0 + (band_w + gap) * ((found_labels is not None) + (true_labels is not None))
    top = 70.0
    width = left + p * cell_w + 20.0
    height = top + m * cell_h + 20.0
    cv = Canvas(width, height)
    if title:
        cv.text(10.0, 20.0, title, size=12)
    if p <= 64:
        for k, j in enumerate(col_order):
            cv.text(
                left + (k + 0.7) * cell_w, top - 6.0, str(col_labels[j]),
                size=9, anchor="start", rotate=-60.0,
            )
    x0 = 10.0
    if found_labels is not None:
        for r, i in enumerate(row_order):
            cv.rect(x0, top + r * cell_h, band_w, cell_h, cluster_color(int(found_labels[i])))
        x0 += band_w + gap
    if true_labels is not None:
        uniq = sorted(set(true_labels))
        code = {u: k for k, u in enumerate(uniq)}
        for r, i in enumerate(row_order):
            cv.rect(x0, top + r * cell_h, band_w, cell_h, cluster_color(code[true_labels[i]]))
    for r, i in enumerate(row_order):
        y = top + r * cell_h
        for k, j in enumerate(col_order):
            cv.rect(left + k * cell_w, y, cell_w, cell_h, heat_color(float(matrix[i][j])))
    return cv.render()


def elbow_svg(curve, recommended_c: int, title: str = "") -> str:
    """Distortion-vs-cluster-count plot with the recommended count marked."""
    width, height = 520.0, 360.0
    lm, rm, tm, bm = 60.0, 20.0, 40.0, 50.0
    xs = [c for c, _ in curve]
    ys = [d for _, d in curve]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi - y_lo < 1e-12:
        y_hi = y_lo + 1.0

    def sx(c):
        return lm + (c - x_lo) / (x_hi - x_lo) * (width - lm - rm)

    def sy(d):
        return height - bm - (d - y_lo) / (y_hi - y_lo) * (height - tm - bm)

    cv = Canvas(width, height)
    if title:
        cv.text(10.0, 20.0, title, size=12)
    cv.line(lm, height - bm, width - rm, height - bm)
    cv.line(lm, tm, lm, height - bm)
    cv.text(width / 2, height - 12.0, "clusters", size=10, anchor="middle")
    cv.text(14.0, tm - 8.0, "distortion", size=10)
    cv.polyline([(sx(c), sy(d)) for c, d in curve])
    for c, d in curve:
        cv.circle(sx(c), sy(d), 3.0, "#333333")
        cv.text(sx(c), height - bm + 14.0, str(c), size=8, anchor="middle")
    for c, d in curve:
        if c == recommended_c:
            cv.circle(sx(c), sy(d), 6.0, "none", stroke="#e6194b")
            cv.text(sx(c) + 8.0, sy(d) - 8.0, f"c={c}", size=10, fill="#e6194b")
    cv.text(lm - 6.0, height - bm + 4.0, f"{y_lo:.3g}", size=8, anchor="end")
    cv.text(lm - 6.0, tm + 4.0, f"{y_hi:.3g}", size=8, anchor="end")
    return cv.render()


def network_svg(names, diag, edges, title: str = "", linear_diameter: bool = False) -> str:
    """Circular-layout co-occurrence network.

    ``diag`` holds per-node specification counts, ``edges`` is a list of
    (i, j, count).  Node diameter defaults to sqrt scaling so that area is
    proportional to the count.
    """
    width = height = 640.0
    cx = cy = width / 2.0
    radius = 240.0
    n = len(names)
    if n == 0:
        cv = Canvas(width, height)
        cv.text(10.0, 20.0, title or "empty network", size=12)
        return cv.render()
    pos = []
    for k in range(n):
        ang = 2.0 * math.pi * k / n - math.pi / 2.0
        pos.append((cx + radius * math.cos(ang), cy + radius * math.sin(ang)))
    max_d = max(max(diag), 1)
    max_e = max((c for _, _, c in edges), default=1)
    cv = Canvas(width, height)
    if title:
        cv.text(10.0, 20.0, title, size=12)
    for i, j, c in edges:
        w = 0.5 + 5.5 * c / max_e
        cv.line(pos[i][0], pos[i][1], pos[j][0], pos[j][1], stroke="#7799bb", width=w)
    for k in range(n):
        if linear_diameter:
            r = 3.0 + 15.0 * diag[k] / max_d
        else:
            r = 3.0 + 15.0 * math.sqrt(diag[k] / max_d)
        cv.circle(pos[k][0], pos[k][1], r, "#f58231", stroke="#333333")
        dx = pos[k][0] - cx
        lx = pos[k][0] + (22.0 if dx >= 0 else -22.0)
        cv.text(lx, pos[k][1] + 4.0, str(names[k]), size=10,
                anchor="start" if dx >= 0 else "end")
    return cv.render()
