// The scripted 32-turn run's timeline, mirrored from the engine fixture:
// item 1 completes at turn 14, item 2 at 24, item 3 at 32, threshold 8.

import type { TimelinePayload, TimelinePoint } from "../src/types.js";

const SCORES: Array<[number, number[]]> = [
  [1, [2, 3, 3, 4, 5, 5, 6, 5, 6, 7, 7, 7, 7, 9]],
  [2, [3, 4, 4, 5, 6, 6, 7, 7, 7, 8]],
  [3, [3, 4, 5, 6, 7, 7, 7, 9]],
];

export function fixtureTimeline(): TimelinePayload {
  const points: TimelinePoint[] = [];
  let turn = 0;
  for (const [itemId, scores] of SCORES) {
    for (const phi of scores) {
      turn += 1;
      points.push({
        turn_index: turn,
        item_id: itemId,
        phi,
        state: phi >= 8 ? "completed" : "learning",
      });
    }
  }
  return {
    threshold: 8,
    items: { "1": "learn what each action does in the game", "2": "energy", "3": "win" },
    points,
  };
}
