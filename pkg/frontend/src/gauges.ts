// Similarity gauges. The displayed numbers are always the latest values the
// server reported; nothing is computed client-side.

export function renderGauge(el: HTMLElement, value: number | null): void {
  const fill = el.querySelector<HTMLElement>(".gauge-fill");
  const label = el.querySelector<HTMLElement>(".gauge-value");
  if (!fill || !label) throw new Error("gauge element missing .gauge-fill/.gauge-value");
  if (value === null || value === undefined) {
    fill.style.width = "0%";
    label.textContent = "—";
    return;
  }
  const clamped = Math.max(0, Math.min(1, value));
  fill.style.width = `${(clamped * 100).toFixed(1)}%`;
  label.textContent = value.toFixed(3);
}

export function gaugeTemplate(name: string, title: string): string {
  return `
    <div class="gauge" data-gauge="${name}">
      <span class="gauge-title">${title}</span>
      <div class="gauge-track"><div class="gauge-fill"></div></div>
      <span class="gauge-value">—</span>
    </div>`;
}
