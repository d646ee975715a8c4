/**
 * DOM rendering for the prediction result. The band shown is always the
 * server's band string verbatim; the client never re-derives it from the
 * score.
 */

import type { Prediction } from './api';

export const SCORE_MAX = 24;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderPrediction(container: HTMLElement, prediction: Prediction): void {
  const doc = container.ownerDocument;
  container.replaceChildren();

  const headline = el(doc, 'p', 'score-headline',
    `${prediction.display_score.toFixed(1)} — ${prediction.band}`);
  headline.dataset.band = prediction.band;
  container.appendChild(headline);

  const gauge = el(doc, 'div', 'gauge');
  gauge.setAttribute('role', 'meter');
  gauge.setAttribute('aria-valuemin', '0');
  gauge.setAttribute('aria-valuemax', String(SCORE_MAX));
  gauge.setAttribute('aria-valuenow', prediction.display_score.toFixed(1));
  const fill = el(doc, 'div', `gauge-fill band-${prediction.band}`);
  fill.style.width = `${(prediction.display_score / SCORE_MAX) * 100}%`;
  gauge.appendChild(fill);
  container.appendChild(gauge);

  const details = el(doc, 'details', 'prediction-details');
  details.appendChild(el(doc, 'summary', undefined, 'details'));
  const list = el(doc, 'dl');
  const pairs: Array<[string, string]> = [
    ['raw score', String(prediction.raw_score)],
    ['model version', prediction.model_version],
    ['features', prediction.feature_set.join(' + ')],
  ];
  for (const [label, value] of pairs) {
    list.appendChild(el(doc, 'dt', undefined, label));
    list.appendChild(el(doc, 'dd', undefined, value));
  }
  details.appendChild(list);
  container.appendChild(details);
}

export function renderError(container: HTMLElement, message: string, onRetry: () => void): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(el(doc, 'p', 'error-message', message));
  const retry = el(doc, 'button', 'retry-button', 'retry');
  retry.type = 'button';
  retry.addEventListener('click', onRetry);
  container.appendChild(retry);
}

export function renderNotice(container: HTMLElement, message: string): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(el(doc, 'p', 'validation-notice', message));
}

export function renderUploading(container: HTMLElement): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(el(doc, 'p', 'uploading-message', 'uploading…'));
}

export function clear(container: HTMLElement): void {
  container.replaceChildren();
}
