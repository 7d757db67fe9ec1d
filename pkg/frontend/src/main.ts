import { ApiClient } from "./api.js";
import { SessionConsole } from "./console.js";

// Bootstrap: upload a target image, open a session, mount the console.
export async function boot(root: HTMLElement, baseUrl = ""): Promise<void> {
  const api = new ApiClient(baseUrl);
  root.innerHTML = `
    <form data-role="upload-form" class="upload-form">
      <input data-role="file" type="file" accept="image/png,image/jpeg" aria-label="target image" />
      <button type="submit">steal prompt</button>
      <span data-role="upload-error" class="inline-error" hidden></span>
    </form>
    <div data-role="console"></div>
  `;
  const form = root.querySelector<HTMLFormElement>("[data-role=upload-form]")!;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const file = root.querySelector<HTMLInputElement>("[data-role=file]")!.files?.[0];
    const errorEl = root.querySelector<HTMLElement>("[data-role=upload-error]")!;
    if (!file) {
      errorEl.textContent = "choose an image first";
      errorEl.hidden = false;
      return;
    }
    errorEl.hidden = true;
    try {
      const session = await api.createSession(file, file.name);
      const mountEl = root.querySelector<HTMLElement>("[data-role=console]")!;
      await new SessionConsole(api, session).mount(mountEl);
    } catch (error) {
      errorEl.textContent = error instanceof Error ? error.message : String(error);
      errorEl.hidden = false;
    }
  });
}

declare global {
  interface Window {
    bootLoopConsole: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.bootLoopConsole = boot;
}
