import { categoryColor } from "./palette.js";
import type { VocabEntry } from "./types.js";

// Category lookup built exclusively from GET /vocabulary entries.
export type CategoryIndex = Map<string, string>;

export function buildCategoryIndex(entries: VocabEntry[]): CategoryIndex {
  const index: CategoryIndex = new Map();
  for (const entry of entries) index.set(entry.modifier, entry.category);
  return index;
}

export function filterVocabulary(entries: VocabEntry[], query: string, limit = 8): VocabEntry[] {
  const needle = query.trim().toLowerCase();
  if (!needle) return [];
  return entries.filter((e) => e.modifier.includes(needle)).slice(0, limit);
}

export function renderChips(
  container: HTMLElement,
  modifiers: string[],
  categories: CategoryIndex,
  onRemove: (modifier: string) => void,
): void {
  container.replaceChildren();
  for (const modifier of modifiers) {
    const category = categories.get(modifier);
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.dataset.modifier = modifier;
    chip.dataset.category = category ?? "unknown";
    chip.style.backgroundColor = categoryColor(category);
    chip.title = category ?? "not in vocabulary";

    const text = document.createElement("span");
    text.textContent = modifier;

    const remove = document.createElement("button");
    remove.type = "button";
    remove.className = "chip-remove";
    remove.textContent = "×";
    remove.setAttribute("aria-label", `Remove ${modifier}`);
    remove.addEventListener("click", (event) => {
      event.stopPropagation();
      onRemove(modifier);
    });

    chip.append(text, remove);
    container.appendChild(chip);
  }
}

export function renderAutocomplete(
  listEl: HTMLElement,
  matches: VocabEntry[],
  onPick: (modifier: string) => void,
): void {
  listEl.replaceChildren();
  for (const entry of matches) {
    const item = document.createElement("li");
    item.className = "autocomplete-item";
    item.dataset.modifier = entry.modifier;
    item.textContent = `${entry.modifier} (${entry.category}, ${entry.count})`;
    item.addEventListener("click", () => onPick(entry.modifier));
    listEl.appendChild(item);
  }
  listEl.hidden = matches.length === 0;
}
