import type { HistoryEntry } from "./types.js";

// Renders the audit trail exactly in the server's history order.
export function renderTimeline(el: HTMLElement, history: HistoryEntry[]): void {
  el.replaceChildren();
  for (const entry of history) {
    const item = document.createElement("li");
    item.className = "timeline-entry";

    const edit = document.createElement("span");
    edit.className = "timeline-edit";
    edit.textContent = entry.edit;

    const prompt = document.createElement("code");
    prompt.className = "timeline-prompt";
    prompt.textContent = entry.prompt;

    const scores = document.createElement("span");
    scores.className = "timeline-scores";
    const semantic = entry.scores.semantic === null ? "—" : entry.scores.semantic.toFixed(3);
    const image = entry.scores.image === null ? "—" : entry.scores.image.toFixed(3);
    scores.textContent = `semantic ${semantic} / image ${image}`;

    item.append(edit, prompt, scores);
    el.appendChild(item);
  }
}
