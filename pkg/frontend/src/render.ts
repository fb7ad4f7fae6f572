/** DOM rendering for the review screen. Pure payload -> element mapping:
 * confidences and votes come straight from the server, never recomputed.
 */

import { parseMarkedSentence } from "./highlight.js";
import type { SessionState } from "./controller.js";
import type { ParsedOutcome, ReviewItem } from "./types.js";

export function renderSentence(item: ReviewItem): HTMLElement {
  const container = el("p", "sentence");
  for (const segment of parseMarkedSentence(item.marked_sentence)) {
    if (segment.kind === "plain") {
      container.appendChild(document.createTextNode(segment.text));
    } else {
      const mark = el("mark", segment.kind === "entity1" ? "entity entity-1" : "entity entity-2");
      mark.textContent = segment.text;
      container.appendChild(mark);
    }
  }
  return container;
}

export function outcomeBadge(outcome: ParsedOutcome): string {
  if (outcome.kind === "label") return outcome.label ?? "?";
  if (outcome.kind === "blank") return "(blank)";
  return outcome.style ? `hallucination:${outcome.style}` : "hallucination";
}

export function renderOptions(
  item: ReviewItem,
  selectedOption: number | null,
  onSelect: (optionNumber: number) => void,
): HTMLElement {
  const list = el("ol", "options");
  item.options.forEach((label, index) => {
    const position = index + 1;
    const entry = el("li", position === selectedOption ? "option selected" : "option");
    entry.tabIndex = 0;

    const key = el("span", "option-key");
    key.textContent = String(position);
    entry.appendChild(key);

    const text = el("span", "option-text");
    text.textContent = item.option_texts[index] ?? label;
    entry.appendChild(text);

    const confidence = item.confid[label] ?? 0;
    const bar = el("span", "confidence");
    const fill = el("span", "confidence-fill");
    fill.style.width = `${Math.round(confidence * 100)}%`;
    bar.appendChild(fill);
    bar.title = `confidence ${confidence.toFixed(3)}`;
    entry.appendChild(bar);

    const chips = el("span", "vote-chips");
    for (const vote of item.votes) {
      const supports =
        (vote.outcome.kind === "label" && vote.outcome.label === label) ||
        (vote.outcome.kind === "hallucination" && vote.outcome.style === label);
      if (!supports) continue;
      const chip = el("span", "chip");
      chip.textContent = vote.annotator;
      chip.title = outcomeBadge(vote.outcome);
      chips.appendChild(chip);
    }
    entry.appendChild(chips);

    entry.addEventListener("click", () => onSelect(position));
    list.appendChild(entry);
  });
  return list;
}

export function renderUnsupportedVotes(item: ReviewItem): HTMLElement | null {
  const stray = item.votes.filter(
    (vote) =>
      vote.outcome.kind !== "label" &&
      !(vote.outcome.kind === "hallucination" && vote.outcome.style && item.options.includes(vote.outcome.style)),
  );
  if (stray.length === 0) return null;
  const note = el("p", "stray-votes");
  note.textContent =
    "Unmapped outputs: " +
    stray.map((vote) => `${vote.annotator} -> ${outcomeBadge(vote.outcome)}`).join(", ");
  return note;
}

export function renderProgress(state: SessionState): HTMLElement {
  const progress = state.progress;
  const box = el("div", "progress");
  if (!progress) return box;
  const reviewed = el("span", "progress-count");
  reviewed.textContent = `${progress.reviewed} / ${progress.total} reviewed`;
  box.appendChild(reviewed);

  const bar = el("span", "progress-bar");
  const fill = el("span", "progress-fill");
  const fraction = progress.total === 0 ? 1 : progress.reviewed / progress.total;
  fill.style.width = `${Math.round(fraction * 100)}%`;
  bar.appendChild(fill);
  box.appendChild(bar);

  const auto = el("span", "progress-auto");
  auto.textContent = `${progress.auto_accepted} auto-accepted`;
  box.appendChild(auto);
  return box;
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
