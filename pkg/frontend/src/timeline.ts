// Sense-score timeline: per-item colored segments, the threshold line,
// and vertical markers at completion turns. Pure string-in string-out so
// the renderer is testable without a DOM.

import type { TimelinePayload, TimelinePoint } from "./types.js";

const SEGMENT_COLORS = ["#2563eb", "#ea580c", "#16a34a", "#9333ea", "#0891b2"];

export interface TimelineGeometry {
  width: number;
  height: number;
  pad: number;
}

const DEFAULT_GEOMETRY: TimelineGeometry = { width: 720, height: 260, pad: 36 };

export function completionTurns(points: TimelinePoint[]): number[] {
  return points.filter((p) => p.state === "completed").map((p) => p.turn_index);
}

export function segmentBoundaries(points: TimelinePoint[]): number[] {
  // boundaries are completions followed by another item's segment
  const completions = completionTurns(points);
  const lastTurn = points.length ? Math.max(...points.map((p) => p.turn_index)) : 0;
  return completions.filter((t) => t < lastTurn);
}

export function renderTimeline(
  payload: TimelinePayload,
  geometry: TimelineGeometry = DEFAULT_GEOMETRY,
): string {
  const { width, height, pad } = geometry;
  const points = payload.points;
  if (!points.length) {
    return `<div class="empty-state">no scored turns yet</div>`;
  }
  const maxTurn = Math.max(...points.map((p) => p.turn_index), 1);
  const x = (turn: number) => pad + ((width - 2 * pad) * turn) / maxTurn;
  const y = (phi: number) => height - pad - ((height - 2 * pad) * phi) / 10;

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" stroke="#666"/>`,
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}" stroke="#666"/>`,
  ];

  for (const score of [2, 4, 6, 8, 10]) {
    parts.push(
      `<text x="8" y="${(y(score) + 4).toFixed(1)}" font-size="10" fill="#777">${score}</text>`,
    );
  }

  const byItem = new Map<number, TimelinePoint[]>();
  for (const p of points) {
    const bucket = byItem.get(p.item_id) ?? [];
    bucket.push(p);
    byItem.set(p.item_id, bucket);
  }

  let colorIndex = 0;
  for (const [itemId, pts] of [...byItem.entries()].sort((a, b) => a[0] - b[0])) {
    const color = SEGMENT_COLORS[colorIndex % SEGMENT_COLORS.length];
    colorIndex += 1;
    if (pts.length >= 2) {
      const coords = pts
        .map((p) => `${x(p.turn_index).toFixed(1)},${y(p.phi).toFixed(1)}`)
        .join(" ");
      parts.push(
        `<polyline class="segment" data-item="${itemId}" points="${coords}" fill="none" stroke="${color}" stroke-width="2"/>`,
      );
    }
    for (const p of pts) {
      parts.push(
        `<circle class="point" data-item="${itemId}" cx="${x(p.turn_index).toFixed(1)}" cy="${y(p.phi).toFixed(1)}" r="2.5" fill="${color}"/>`,
      );
    }
  }

  for (const turn of completionTurns(points)) {
    parts.push(
      `<line class="completion-marker" data-turn="${turn}" x1="${x(turn).toFixed(1)}" y1="${pad}" x2="${x(turn).toFixed(1)}" y2="${height - pad}" stroke="#999" stroke-dasharray="3,3"/>`,
    );
  }

  parts.push(
    `<line class="threshold-line" x1="${pad}" y1="${y(payload.threshold).toFixed(1)}" x2="${width - pad}" y2="${y(payload.threshold).toFixed(1)}" stroke="#dc2626" stroke-dasharray="6,4"/>`,
    `<text x="${width - pad + 4}" y="${(y(payload.threshold) + 4).toFixed(1)}" font-size="11" fill="#dc2626">t=${payload.threshold}</text>`,
    `</svg>`,
  );
  return parts.join("\n");
}
