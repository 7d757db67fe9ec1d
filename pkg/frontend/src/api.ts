import type {
  GenerateResponse,
  PatchBody,
  PatchResponse,
  SessionState,
  VocabularyResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function throwOnError(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(image: Blob, filename = "target.png"): Promise<SessionState> {
    const form = new FormData();
    form.append("image", image, filename);
    const response = await fetch(this.url("/sessions"), { method: "POST", body: form });
    await throwOnError(response);
    return response.json();
  }

  async getSession(id: string): Promise<SessionState> {
    const response = await fetch(this.url(`/sessions/${id}`));
    await throwOnError(response);
    return response.json();
  }

  async patchPrompt(id: string, body: PatchBody): Promise<PatchResponse> {
    const response = await fetch(this.url(`/sessions/${id}/prompt`), {
      method: "PATCH",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await throwOnError(response);
    return response.json();
  }

  async generate(id: string, seeds: number[]): Promise<GenerateResponse> {
    const response = await fetch(this.url(`/sessions/${id}/generate`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ seeds }),
    });
    await throwOnError(response);
    return response.json();
  }

  async getVocabulary(category?: string): Promise<VocabularyResponse> {
    const suffix = category ? `?category=${encodeURIComponent(category)}` : "";
    const response = await fetch(this.url(`/vocabulary${suffix}`));
    await throwOnError(response);
    return response.json();
  }
}
