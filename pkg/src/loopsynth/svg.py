"""Static latency/resource scatter plot written as plain SVG."""
from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN = 70


def _scale(lo: float, hi: float, a: float, b: float):
    if hi == lo:
        mid = (a + b) / 2
        return lambda v: mid
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / n for k in range(n + 1)]


def scatter(points: list, front: list, title: str = "") -> str:
    """``points``/``front`` hold objects with ``id``, ``latency`` and ``r``; front points are drawn red."""
    xs = [p.latency for p in points] or [0]
    ys = [p.r for p in points] or [0.0]
    sx = _scale(min(xs), max(xs), MARGIN, WIDTH - MARGIN / 2)
    sy = _scale(min(ys), max(ys), HEIGHT - MARGIN, MARGIN / 2)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN / 2}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{MARGIN}" y2="{MARGIN / 2}" stroke="black"/>',
    ]
    for v in _ticks(min(xs), max(xs)):
        x = sx(v)
        out.append(f'<text x="{x:.1f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">{v:.0f}</text>')
    for v in _ticks(min(ys), max(ys)):
        y = sy(v)
        out.append(f'<text x="{MARGIN - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 20}" text-anchor="middle">latency (cycles)</text>')
    out.append(f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {HEIGHT / 2})">resources (%)</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    on_front = {p.id for p in front}
    for p in points:
        if p.id in on_front:
            continue
        out.append(f'<circle cx="{sx(p.latency):.1f}" cy="{sy(p.r):.1f}" r="3" fill="#8899aa"/>')
    ordered = sorted(front, key=lambda p: (p.latency, p.r))
    if len(ordered) > 1:
        path = " ".join(f"{sx(p.latency):.1f},{sy(p.r):.1f}" for p in ordered)
        out.append(f'<polyline points="{path}" fill="none" stroke="#cc2222" stroke-width="1.5"/>')
    for p in ordered:
        out.append(f'<circle cx="{sx(p.latency):.1f}" cy="{sy(p.r):.1f}" r="5" fill="#cc2222">'
                   f'<title>{escape(p.id)}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
