"""Sense-score timeline exports: CSV for analysis, hand-rolled SVG for eyes.

No plotting dependency: the SVG is assembled from per-item polyline
segments, a dashed threshold line, and vertical markers at completion
turns.
"""

from __future__ import annotations

from .curriculum import TimelinePoint, curriculum_timeline
from .store import Store

_SEGMENT_COLORS = ("#2563eb", "#ea580c", "#16a34a", "#9333ea", "#0891b2",
                   "#ca8a04")


def timeline_csv(store: Store) -> str:
    lines = ["turn,item_id,phi"]
    for p in curriculum_timeline(store):
        lines.append(f"{p.turn_index},{p.item_id},{p.sense_score}")
    return "\n".join(lines) + "\n"


def timeline_svg(store: Store, threshold: int = 8, width: int = 720,
                 height: int = 260) -> str:
    points = curriculum_timeline(store)
    return render_timeline_svg(points, threshold=threshold, width=width,
                               height=height)


def render_timeline_svg(points: list[TimelinePoint], threshold: int = 8,
                        width: int = 720, height: int = 260) -> str:
    pad = 34
    max_turn = max((p.turn_index for p in points), default=1)
    x_span = max(max_turn, 1)

    def x(turn: float) -> float:
        return pad + (width - 2 * pad) * turn / x_span

    def y(score: float) -> float:
        return height - pad - (height - 2 * pad) * score / 10.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="#555"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#555"/>',
        f'<line class="threshold" x1="{pad}" y1="{y(threshold):.1f}" '
        f'x2="{width - pad}" y2="{y(threshold):.1f}" stroke="#dc2626" '
        f'stroke-dasharray="6,4"/>',
        f'<text x="{width - pad + 4}" y="{y(threshold) + 4:.1f}" font-size="11" '
        f'fill="#dc2626">threshold {threshold}</text>',
    ]

    by_item: dict[int, list[TimelinePoint]] = {}
    for p in points:
        by_item.setdefault(p.item_id, []).append(p)

    for idx, (item_id, pts) in enumerate(sorted(by_item.items())):
        color = _SEGMENT_COLORS[idx % len(_SEGMENT_COLORS)]
        coords = " ".join(f"{x(p.turn_index):.1f},{y(p.sense_score):.1f}"
                          for p in pts)
        parts.append(f'<polyline class="segment" data-item="{item_id}" '
                     f'points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for p in pts:
            if p.state == "completed":
                parts.append(f'<line class="completion" data-turn="{p.turn_index}" '
                             f'x1="{x(p.turn_index):.1f}" y1="{pad}" '
                             f'x2="{x(p.turn_index):.1f}" y2="{height - pad}" '
                             f'stroke="#888" stroke-dasharray="3,3"/>')

    for score in (0, 2, 4, 6, 8, 10):
        parts.append(f'<text x="6" y="{y(score) + 4:.1f}" font-size="10" '
                     f'fill="#555">{score}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
