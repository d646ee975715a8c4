/**
 * Upload lifecycle as a tiny immutable state machine. Exactly one phase at
 * a time, and a Prediction is present if and only if the phase is "done".
 */

import type { Prediction } from './api';

export type Phase = 'idle' | 'uploading' | 'done' | 'error';

export interface FileMeta {
  name: string;
  size: number;
}

export interface UploadState {
  phase: Phase;
  file: FileMeta | null;
  prediction: Prediction | null;
  error: string | null;
  /** client-side validation message shown while still idle */
  notice: string | null;
}

export function initialState(): UploadState {
  return { phase: 'idle', file: null, prediction: null, error: null, notice: null };
}

export function isWavFilename(name: string): boolean {
  return /\.wav$/i.test(name);
}

/** File picked. Non-.wav files are blocked here: the phase stays idle and a
 * validation notice is set instead of selecting the file. */
export function selectFile(state: UploadState, file: FileMeta): UploadState {
  if (!isWavFilename(file.name)) {
    return { ...initialState(), file: state.file, notice: `"${file.name}" is not a .wav file; the server only accepts WAV uploads` };
  }
  return { ...initialState(), file };
}

export function startUpload(state: UploadState): UploadState {
  if (!state.file) {
    throw new Error('cannot upload without a selected file');
  }
  return { phase: 'uploading', file: state.file, prediction: null, error: null, notice: null };
}

export function uploadSucceeded(state: UploadState, prediction: Prediction): UploadState {
  return { phase: 'done', file: state.file, prediction, error: null, notice: null };
}

export function uploadFailed(state: UploadState, message: string): UploadState {
  return { phase: 'error', file: state.file, prediction: null, error: message, notice: null };
}

/** The structural invariant every reachable state must satisfy. */
export function isValidState(state: UploadState): boolean {
  const predictionIffDone = (state.phase === 'done') === (state.prediction !== null);
  const errorOnlyWhenFailed = state.phase === 'error' ? state.error !== null : state.error === null;
  return predictionIffDone && errorOnlyWhenFailed;
}
