import { ApiClient, ApiError } from "./api.js";
import {
  buildCategoryIndex,
  filterVocabulary,
  renderAutocomplete,
  renderChips,
  type CategoryIndex,
} from "./chips.js";
import { renderGallery } from "./gallery.js";
import { gaugeTemplate, renderGauge } from "./gauges.js";
import { renderTimeline } from "./timeline.js";
import type { Scores, SessionState, VocabEntry } from "./types.js";

const TEMPLATE = `
  <div class="banner" data-role="banner" hidden></div>
  <div class="columns">
    <section class="panel">
      <h2>Target</h2>
      <img data-role="target" class="target-image" alt="target image" />
      <div class="gauges">
        ${gaugeTemplate("semantic", "semantic similarity")}
        ${gaugeTemplate("image", "image similarity")}
      </div>
    </section>
    <section class="panel">
      <h2>Stolen prompt</h2>
      <form data-role="subject-form" class="subject-form">
        <input data-role="subject" type="text" aria-label="subject" />
        <button type="submit">apply subject</button>
        <span data-role="subject-error" class="inline-error" hidden></span>
      </form>
      <div data-role="chips" class="chips"></div>
      <div class="add-row">
        <input data-role="add-input" type="text" placeholder="add modifier" aria-label="add modifier" />
        <ul data-role="autocomplete" class="autocomplete" hidden></ul>
      </div>
      <code data-role="composed" class="composed"></code>
      <form data-role="generate-form" class="generate-form">
        <input data-role="seeds" type="text" value="0,1,2,3" aria-label="seeds" />
        <button data-role="generate" type="submit">regenerate</button>
      </form>
      <div data-role="gallery" class="gallery"></div>
    </section>
  </div>
  <section class="panel">
    <h2>History</h2>
    <ol data-role="timeline" class="timeline"></ol>
  </section>
`;

export class SessionConsole {
  private state: SessionState;
  private vocabulary: VocabEntry[] = [];
  private categories: CategoryIndex = new Map();
  private inFlight = false;
  private root: HTMLElement | null = null;

  constructor(private api: ApiClient, initial: SessionState) {
    this.state = initial;
  }

  get sessionId(): string {
    return this.state.id;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    root.innerHTML = TEMPLATE;
    // Chip categories come from the vocabulary endpoint, nowhere else.
    const vocab = await this.api.getVocabulary();
    this.vocabulary = vocab.entries;
    this.categories = buildCategoryIndex(vocab.entries);

    this.q<HTMLFormElement>("[data-role=subject-form]").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.editSubjectFlow(this.q<HTMLInputElement>("[data-role=subject]").value);
    });
    const addInput = this.q<HTMLInputElement>("[data-role=add-input]");
    addInput.addEventListener("input", () => {
      const matches = filterVocabulary(this.vocabulary, addInput.value);
      renderAutocomplete(this.q("[data-role=autocomplete]"), matches, (m) => {
        addInput.value = "";
        this.q("[data-role=autocomplete]").hidden = true;
        void this.addModifierFlow(m);
      });
    });
    this.q<HTMLFormElement>("[data-role=generate-form]").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.regenerateFlow(this.parseSeeds());
    });

    const target = this.q<HTMLImageElement>("[data-role=target]");
    target.src = this.api.url(`/images/${this.state.id}/target.png`);
    this.renderAll();
  }

  private q<T extends HTMLElement = HTMLElement>(selector: string): T {
    const el = this.root?.querySelector<T>(selector);
    if (!el) throw new Error(`missing element: ${selector}`);
    return el;
  }

  private parseSeeds(): number[] {
    return this.q<HTMLInputElement>("[data-role=seeds]")
      .value.split(",")
      .map((s) => Number.parseInt(s.trim(), 10))
      .filter((n) => Number.isFinite(n));
  }

  // -- rendering (state is only ever what the server sent back) -------------

  private renderAll(): void {
    this.renderGauges(this.state.metrics);
    this.renderPrompt();
    renderTimeline(this.q("[data-role=timeline]"), this.state.history);
  }

  private renderGauges(metrics: Scores): void {
    renderGauge(this.q("[data-gauge=semantic]"), metrics.semantic);
    renderGauge(this.q("[data-gauge=image]"), metrics.image);
  }

  private renderPrompt(): void {
    const prompt = this.state.stolen_prompt;
    this.q<HTMLInputElement>("[data-role=subject]").value = prompt.subject;
    this.q("[data-role=composed]").textContent = prompt.composed;
    renderChips(
      this.q("[data-role=chips]"),
      prompt.modifiers.map((m) => m.modifier),
      this.categories,
      (m) => void this.removeModifierFlow(m),
    );
  }

  private showBanner(text: string, expired = false): void {
    const banner = this.q("[data-role=banner]");
    banner.textContent = text;
    banner.hidden = false;
    banner.classList.toggle("banner-expired", expired);
  }

  private clearBanner(): void {
    const banner = this.q("[data-role=banner]");
    banner.hidden = true;
    banner.textContent = "";
  }

  private handleError(error: unknown): void {
    if (error instanceof ApiError && error.status === 404) {
      this.showBanner("Session expired — start a new one.", true);
      return;
    }
    this.showBanner(error instanceof Error ? error.message : String(error));
  }

  private async refreshHistory(): Promise<void> {
    // The timeline mirrors the server's history ordering exactly.
    const session = await this.api.getSession(this.state.id);
    this.state = session;
    this.renderAll();
  }

  // -- flows -----------------------------------------------------------------

  async editSubjectFlow(newSubject: string): Promise<void> {
    const errorEl = this.q("[data-role=subject-error]");
    if (!newSubject.trim()) {
      errorEl.textContent = "subject must be non-empty";
      errorEl.hidden = false;
      return; // inline validation, no request
    }
    errorEl.hidden = true;
    await this.mutate(async () => {
      const patched = await this.api.patchPrompt(this.state.id, { subject: newSubject });
      this.state.stolen_prompt = patched.stolen_prompt;
      this.state.metrics = patched.metrics;
      this.renderGauges(patched.metrics);
      this.renderPrompt();
      await this.refreshHistory();
    });
  }

  async addModifierFlow(modifier: string): Promise<void> {
    await this.mutate(async () => {
      const patched = await this.api.patchPrompt(this.state.id, { add: [modifier] });
      this.state.stolen_prompt = patched.stolen_prompt;
      this.state.metrics = patched.metrics;
      this.renderGauges(patched.metrics);
      this.renderPrompt();
      await this.refreshHistory();
    });
  }

  async removeModifierFlow(modifier: string): Promise<void> {
    await this.mutate(async () => {
      const patched = await this.api.patchPrompt(this.state.id, { remove: [modifier] });
      this.state.stolen_prompt = patched.stolen_prompt;
      this.state.metrics = patched.metrics;
      this.renderGauges(patched.metrics);
      this.renderPrompt();
      await this.refreshHistory();
    });
  }

  async regenerateFlow(seeds: number[]): Promise<void> {
    await this.mutate(async () => {
      const result = await this.api.generate(this.state.id, seeds);
      renderGallery(
        this.q("[data-role=gallery]"),
        result.images,
        result.errors,
        (path) => this.api.url(path),
      );
      this.state.metrics = { ...this.state.metrics, image: result.image_similarity };
      this.renderGauges(this.state.metrics);
      await this.refreshHistory();
    });
  }

  // One in-flight mutation per session; state changes only on server success.
  private async mutate(action: () => Promise<void>): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    const generate = this.q<HTMLButtonElement>("[data-role=generate]");
    generate.disabled = true;
    try {
      this.clearBanner();
      await action();
    } catch (error) {
      this.handleError(error);
    } finally {
      this.inFlight = false;
      generate.disabled = false;
    }
  }
}
