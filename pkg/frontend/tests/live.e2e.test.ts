// @vitest-environment node
// End-to-end round trip against the real (mock-backed) session service; pure
// API traffic, so it runs on node's networked fetch rather than jsdom's.
// Skipped unless CONSOLE_API_URL points at a running server, e.g.
//   promptsteal serve --config cfg.toml --port 8731
//   CONSOLE_API_URL=http://127.0.0.1:8731 npm test

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";

const BASE = process.env.CONSOLE_API_URL;

// A tiny valid 1x1 PNG (no planted metadata; the mock captioner hashes pixels).
const PNG_1X1 = Uint8Array.from(
  atob(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGNgYGBgAAAABQAB" +
      "h6FO1AAAAABJRU5ErkJggg==",
  ),
  (c) => c.charCodeAt(0),
);

describe.skipIf(!BASE)("live console round trip", () => {
  it("create -> edit subject -> regenerate -> history, chips match /vocabulary", async () => {
    const api = new ApiClient(BASE);

    const vocab = await api.getVocabulary();
    expect(vocab.schema_version).toBe("1");
    const categories = new Set(vocab.entries.map((e) => e.category));
    expect(categories.size).toBeGreaterThan(0);

    const session = await api.createSession(new Blob([PNG_1X1], { type: "image/png" }));
    expect(session.stolen_prompt.subject.length).toBeGreaterThan(0);
    const initialHistory = session.history.length;

    // Every chip category the console would render must come from /vocabulary.
    const served = new Map(vocab.entries.map((e) => [e.modifier, e.category]));
    for (const m of session.stolen_prompt.modifiers) {
      expect(served.has(m.modifier)).toBe(true);
    }

    const patched = await api.patchPrompt(session.id, { subject: "counselor deanna troi" });
    expect(patched.stolen_prompt.subject).toBe("counselor deanna troi");
    expect(patched.metrics.semantic).not.toBeNull();

    const generated = await api.generate(session.id, [0, 1, 2, 3]);
    expect(generated.images).toHaveLength(4);
    expect(generated.images.every((u) => typeof u === "string")).toBe(true);
    expect(generated.image_similarity).not.toBeNull();

    const refreshed = await api.getSession(session.id);
    expect(refreshed.history.length).toBe(initialHistory + 2);
    expect(refreshed.history.at(-1)!.edit).toContain("regenerate");

    const image = await fetch(api.url(generated.images[0]!));
    expect(image.status).toBe(200);
    expect(image.headers.get("content-type")).toBe("image/png");
  }, 30_000);
});
