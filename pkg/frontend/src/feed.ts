// Turn feed cards: one per committed turn, flagged on game over.

import type { TurnEvent } from "./types.js";

export interface FeedCard {
  turn: number;
  title: string;
  summary: string;
  score: string;
  reasoning: string;
  flagged: boolean;
}

export function buildFeedCard(event: TurnEvent): FeedCard {
  const decision = event.decision_type ? ` (${event.decision_type})` : "";
  const reasoning = event.sense_reasoning
    ? event.sense_reasoning.length > 140
      ? event.sense_reasoning.slice(0, 137) + "..."
      : event.sense_reasoning
    : "";
  return {
    turn: event.turn_index,
    title: `turn ${event.turn_index}: ${event.action_id}${decision}`,
    summary: event.diff_summary || "(no diff)",
    score:
      event.sense_score === null || event.sense_score === undefined
        ? ""
        : `sense ${event.sense_score}/10`,
    reasoning,
    flagged: event.status === "GAME_OVER",
  };
}

export function renderFeedCard(card: FeedCard): string {
  const cls = card.flagged ? "feed-card flagged" : "feed-card";
  const badge = card.flagged
    ? `<span class="badge">game over - losing sequence logged</span>`
    : "";
  return [
    `<article class="${cls}" data-turn="${card.turn}">`,
    `<header>${escapeHtml(card.title)} ${badge}</header>`,
    `<p class="summary">${escapeHtml(card.summary)}</p>`,
    card.score ? `<p class="score">${escapeHtml(card.score)}</p>` : "",
    card.reasoning ? `<p class="reasoning">${escapeHtml(card.reasoning)}</p>` : "",
    `</article>`,
  ]
    .filter(Boolean)
    .join("");
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
