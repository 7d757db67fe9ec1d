// Fixed five-color palette for modifier categories, matching the report plots.

export const CATEGORY_COLORS: Record<string, string> = {
  trending: "#1f77b4",
  artist: "#d62728",
  medium: "#2ca02c",
  movement: "#9467bd",
  flavor: "#ff7f0e",
};

// Modifiers outside the served vocabulary get a neutral chip.
export const UNKNOWN_COLOR = "#7f7f7f";

export function categoryColor(category: string | undefined): string {
  return (category && CATEGORY_COLORS[category]) || UNKNOWN_COLOR;
}
