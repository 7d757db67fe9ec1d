// Wire types for the session service API. Every response carries schema_version.

export interface VocabEntry {
  modifier: string;
  count: number;
  category: string;
}

export interface VocabularyResponse {
  schema_version: string;
  entries: VocabEntry[];
}

export interface Scores {
  semantic: number | null;
  image: number | null;
}

export interface StolenModifier {
  modifier: string;
  posterior: number | null;
}

export interface StolenPromptView {
  subject: string;
  modifiers: StolenModifier[];
  composed: string;
}

export interface HistoryEntry {
  edit: string;
  subject: string;
  modifiers: string[];
  prompt: string;
  scores: Scores;
  images: string[];
  at: number;
}

export interface SessionState {
  schema_version: string;
  id: string;
  created_at: number;
  stolen_prompt: StolenPromptView;
  metrics: Scores;
  history: HistoryEntry[];
}

export interface PatchBody {
  subject?: string;
  add?: string[];
  remove?: string[];
}

export interface PatchResponse {
  schema_version: string;
  metrics: Scores;
  stolen_prompt: StolenPromptView;
}

export interface GenerateResponse {
  schema_version: string;
  images: (string | null)[];
  errors: (string | null)[];
  image_similarity: number | null;
}
