// Regeneration gallery: one tile per requested seed, rendered next to the
// target image; failed seeds become placeholder tiles instead of vanishing.

export function renderGallery(
  el: HTMLElement,
  images: (string | null)[],
  errors: (string | null)[],
  resolveUrl: (path: string) => string,
): void {
  el.replaceChildren();
  images.forEach((url, i) => {
    const tile = document.createElement("div");
    tile.className = "tile";
    if (url) {
      const img = document.createElement("img");
      img.src = resolveUrl(url);
      img.alt = `generated image ${i}`;
      tile.appendChild(img);
    } else {
      tile.classList.add("tile-failed");
      tile.title = errors[i] ?? "generation failed";
      tile.textContent = "⚠";
    }
    el.appendChild(tile);
  });
}
