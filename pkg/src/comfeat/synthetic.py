"""Deterministic synthetic fixtures: embeddings, tone clips, and a labeled
corpus on disk.

The real depression corpus is access-restricted, so the test suite and the
experiment scripts run against generated stand-ins. Everything here is a
pure function of (id, seed): the embedding for a given utterance never
changes across runs or platforms.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, encode_wav
from .embeddings import store_embedding
from .spectral import SOURCE_DIMS

DEFAULT_DIM_OTHER = 64


def _rng_for(utt_id: str, source: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{source}:{utt_id}".encode()).digest()
    return np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))


def synthetic_embedding(utt_id: str, source: str, seed: int = 0, n_frames: int = 1) -> np.ndarray:
    """Seeded pseudo-embedding: per-utterance location in [0, 1] plus
    unit-variance noise, float32-exact, shape (n_frames, dim).

    The location term makes mean(embedding) vary across utterances, which is
    what the synthetic severity labels are built from.
    """
    rng = _rng_for(utt_id, source, seed)
    dim = SOURCE_DIMS.get(source, DEFAULT_DIM_OTHER)
    location = rng.uniform(0.0, 1.0)
    rows = location + rng.standard_normal((n_frames, dim))
    return rows.astype(np.float32).astype(np.float64)


def synthetic_tone_clip(utt_id: str, seed: int = 0, sample_rate: int = 16_000,
                        duration: float = 1.0) -> tuple[AudioClip, float]:
    """Seeded test clip: a Hann-enveloped tone whose frequency encodes a
    hidden value in [0, 1]. Returns (clip, hidden_value)."""
    rng = _rng_for(utt_id, "tone", seed)
    hidden = float(rng.uniform(0.0, 1.0))
    freq = 300.0 + hidden * 2700.0  # 300..3000 Hz, well inside the passband
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    envelope = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
    samples = 0.5 * np.sin(2 * np.pi * freq * t) * envelope
    return AudioClip(channels=samples[np.newaxis, :], sample_rate=sample_rate), hidden


def severity_from_mean(embedding: np.ndarray) -> float:
    """The synthetic labeling rule: clamp(24 * mean(embedding), 0, 24)."""
    return float(np.clip(24.0 * np.mean(embedding), 0.0, 24.0))


def build_synthetic_corpus(out_dir: Path | str, n_utterances: int = 200, seed: int = 0,
                           embedding_source: str = "trillsson",
                           with_audio: bool = False,
                           audio_weight: float = 0.0) -> Path:
    """Write a labeled corpus (CFEM files, optional WAVs, manifest CSV).

    Labels: clamp(24 * ((1 - audio_weight) * mean(embedding)
                        + audio_weight * hidden_tone_value), 0, 24).
    With audio_weight = 0 this is exactly the mean-embedding rule. Returns
    the manifest path.
    """
    if embedding_source not in ("trillsson", "xvector"):
        raise ValueError("manifest schema only carries trillsson/xvector paths")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.csv"

    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "audio_path", "trillsson_path", "xvector_path", "score"])
        for i in range(n_utterances):
            utt_id = f"utt{i:04d}"
            emb = synthetic_embedding(utt_id, embedding_source, seed)
            emb_path = out_dir / f"{utt_id}.{embedding_source}.cfem"
            emb_path.write_bytes(store_embedding(emb, embedding_source))

            audio_path = ""
            hidden = 0.0
            if with_audio:
                clip, hidden = synthetic_tone_clip(utt_id, seed)
                wav_path = out_dir / f"{utt_id}.wav"
                wav_path.write_bytes(encode_wav(clip))
                audio_path = wav_path.name

            blend = (1.0 - audio_weight) * float(np.mean(emb)) + audio_weight * hidden
            score = float(np.clip(24.0 * blend, 0.0, 24.0))
            row = [utt_id, audio_path, "", "", f"{score:.6f}"]
            row[2 if embedding_source == "trillsson" else 3] = emb_path.name
            writer.writerow(row)
    return manifest_path
