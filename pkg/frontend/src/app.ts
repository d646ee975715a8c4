/**
 * Wires the upload form to the prediction API: pick a .wav (plus optional
 * CFEM embedding files for models with neural branches), submit, render the
 * returned severity. One prediction in flight at a time.
 */

import { ApiError, requestPrediction, type PredictOptions } from './api';
import {
  initialState,
  isWavFilename,
  selectFile,
  startUpload,
  uploadFailed,
  uploadSucceeded,
  type UploadState,
} from './state';
import { clear, renderError, renderNotice, renderPrediction, renderUploading } from './render';

export interface App {
  getState(): UploadState;
  /** resolves when the in-flight submission (if any) settles */
  whenSettled(): Promise<void>;
}

export function initApp(root: HTMLElement, options: PredictOptions = {}): App {
  root.innerHTML = `
    <section class="upload-panel">
      <label>recording (.wav)
        <input type="file" id="audio-input" accept=".wav,audio/wav,audio/x-wav" />
      </label>
      <label>embedding files (.cfem, one per neural branch)
        <input type="file" id="embedding-input" multiple />
      </label>
      <button type="button" id="upload-button" disabled>upload audio</button>
      <p class="format-note">WAV only — compressed formats are not supported by this server.</p>
    </section>
    <section class="result-panel" id="result"></section>
  `;

  const audioInput = root.querySelector<HTMLInputElement>('#audio-input')!;
  const embeddingInput = root.querySelector<HTMLInputElement>('#embedding-input')!;
  const button = root.querySelector<HTMLButtonElement>('#upload-button')!;
  const result = root.querySelector<HTMLElement>('#result')!;

  let state = initialState();
  let settled: Promise<void> = Promise.resolve();

  function apply(next: UploadState): void {
    state = next;
    button.disabled = state.phase === 'uploading' || !state.file;
    audioInput.disabled = state.phase === 'uploading';
    switch (state.phase) {
      case 'idle':
        if (state.notice) renderNotice(result, state.notice);
        else clear(result);
        break;
      case 'uploading':
        renderUploading(result);
        break;
      case 'done':
        renderPrediction(result, state.prediction!);
        break;
      case 'error':
        renderError(result, state.error!, () => submit());
        break;
    }
  }

  function submit(): void {
    const file = audioInput.files?.[0];
    if (!file || !isWavFilename(file.name) || state.phase === 'uploading') return;
    const embeddings = Array.from(embeddingInput.files ?? []);
    apply(startUpload(state));
    settled = requestPrediction(file, embeddings, options)
      .then((prediction) => apply(uploadSucceeded(state, prediction)))
      .catch((err: unknown) => {
        const message = err instanceof ApiError
          ? err.message
          : 'network failure — is the server reachable?';
        apply(uploadFailed(state, message));
      });
  }

  audioInput.addEventListener('change', () => {
    const file = audioInput.files?.[0];
    if (!file) {
      apply(initialState());
      return;
    }
    apply(selectFile(state, { name: file.name, size: file.size }));
    if (state.notice) audioInput.value = '';
  });

  button.addEventListener('click', submit);

  return {
    getState: () => state,
    whenSettled: () => settled,
  };
}
