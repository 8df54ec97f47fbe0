"""Byte-deterministic SVG output for cascade traces and P/R curves."""

from __future__ import annotations

from .geometry import Box, TextPolygon

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _points(pts, image_h: float) -> str:
    # internal coordinates are y-up, SVG is y-down
    return " ".join(f"{_fmt(x)},{_fmt(image_h - y)}" for x, y in pts)


def stage_svg(kind: str, stage: int, geometry: list, image_w: float, image_h: float,
              ground_truth: list[TextPolygon] = ()) -> str:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(image_w)}" height="{_fmt(image_h)}" '
        f'viewBox="0 0 {_fmt(image_w)} {_fmt(image_h)}">',
        f'<rect x="0" y="0" width="{_fmt(image_w)}" height="{_fmt(image_h)}" fill="white" stroke="black"/>',
        f'<text x="4" y="14" font-size="12" font-family="monospace">stage {stage} ({kind})</text>',
    ]
    for gt in ground_truth:
        out.append(f'<polygon points="{_points(gt.ring(), image_h)}" fill="#cccccc" stroke="none"/>')
    for i, g in enumerate(geometry):
        color = _PALETTE[i % len(_PALETTE)]
        if isinstance(g, Box):
            x0, y0, x1, y1 = g.corners()
            ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            out.append(f'<polygon points="{_points(ring, image_h)}" fill="none" stroke="{color}"/>')
        else:
            out.append(f'<polygon points="{_points(g.ring(), image_h)}" fill="none" stroke="{color}"/>')
            x, y = g.top[0]
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(image_h - y)}" r="2" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pr_curve_svg(sweep: list[dict], size: int = 320) -> str:
    """Recall on x, precision on y; one marker per score threshold."""
    pad = 40
    span = size - 2 * pad

    def xy(r, p):
        return pad + r * span, size - pad - p * span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
        f'<text x="{size / 2}" y="{size - 8}" font-size="12" text-anchor="middle">recall</text>',
        f'<text x="12" y="{size / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 12 {size / 2})">precision</text>',
    ]
    pts = [xy(row["r"], row["p"]) for row in sweep]
    if pts:
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="#1f77b4"/>')
    for row, (x, y) in zip(sweep, pts):
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="#1f77b4">'
                   f'<title>score&gt;={row["score_thresh"]}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
