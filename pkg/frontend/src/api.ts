/** Client for the severity prediction API (POST /api/v1/predict). */

export interface Prediction {
  raw_score: number;
  display_score: number;
  band: string;
  feature_set: string[];
  model_version: string;
  processing_ms: number;
}

/** A non-2xx reply; `message` carries the server's error text verbatim. */
export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export interface PredictOptions {
  apiBase?: string;
  fetchFn?: typeof fetch;
}

/**
 * Upload one WAV plus any CFEM embedding files and return the server's
 * Prediction. Each embedding file goes out as a repeated "embedding" part;
 * the server matches parts to model branches by the CFEM source tag.
 */
export async function requestPrediction(
  audio: File,
  embeddings: File[],
  options: PredictOptions = {},
): Promise<Prediction> {
  const base = options.apiBase ?? '';
  const fetchFn = options.fetchFn ?? fetch;

  const form = new FormData();
  form.append('audio', audio, audio.name);
  for (const emb of embeddings) {
    form.append('embedding', emb, emb.name);
  }

  const response = await fetchFn(`${base}/api/v1/predict`, {
    method: 'POST',
    body: form,
  });

  if (!response.ok) {
    let message = `request failed with status ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) message = body.error;
    } catch {
      // non-JSON error body; keep the generic message
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as Prediction;
}
