"""Dataset plumbing and the training/evaluation loop.

A manifest CSV indexes the corpus: one row per utterance with an optional
audio path, optional per-source embedding paths, and a severity label in
[0, 24] (PHQ-8 total score convention). Spectral features are computed from
the audio through the decode -> mono -> 16 kHz chain; neural features are
loaded from CFEM files. Training is plain mini-batch Adam on MSE with
dev-RMSE early stopping, bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import audio_io, embeddings, neuralnet
from .audio_io import MODEL_SAMPLE_RATE
from .spectral import (
    LINEAR_SCALE,
    MEL_SCALE,
    SPECTRAL_SOURCES,
    FeatureVector,
    SpectralConfig,
    cepstral_features,
    temporal_mean_pool,
)

SCORE_MIN, SCORE_MAX = 0.0, 24.0

MANIFEST_HEADER = ["id", "audio_path", "trillsson_path", "xvector_path", "score"]

# (upper bound, band); the last band closes at SCORE_MAX inclusive.
SEVERITY_BANDS = [
    (5.0, "minimal"),
    (10.0, "mild"),
    (15.0, "moderate"),
    (20.0, "moderately-severe"),
    (24.0, "severe"),
]


class BadHeader(ValueError):
    pass


class BadRow(ValueError):
    pass


class DuplicateId(ValueError):
    pass


class ScoreOutOfRange(ValueError):
    pass


class Empty(ValueError):
    pass


class NoTrainData(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


class NonFinite(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    audio_path: str | None
    embedding_paths: dict
    score: float


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; the paper-of-record architecture knobs live
    in neuralnet.ModelConfig."""

    feature_set: tuple
    epochs: int
    batch_size: int = 16
    lr: float = 1e-3
    dropout_p: float = 0.2
    seed: int = 0
    split_ratios: tuple = (0.7, 0.15)
    early_stop_patience: int = 10

    def __post_init__(self):
        object.__setattr__(self, "feature_set", tuple(self.feature_set))
        object.__setattr__(self, "split_ratios", tuple(self.split_ratios))
        if not self.feature_set:
            raise ValueError("feature_set must be non-empty")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        train_r, dev_r = self.split_ratios
        if not (0.0 < train_r < 1.0 and 0.0 < dev_r < 1.0 and train_r + dev_r < 1.0):
            raise ValueError("split ratios must lie in (0,1) and sum to < 1")


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    n: int
    feature_set: tuple
    model_version: str

    def __post_init__(self):
        if self.n < 1:
            raise Empty("a report needs at least one prediction")
        assert self.mae <= self.rmse + 1e-12, "MAE cannot exceed RMSE"

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "n": self.n,
            "feature_set": list(self.feature_set),
            "model_version": self.model_version,
        }


def load_manifest(text) -> list[ManifestEntry]:
    """Parse and validate a manifest CSV. Paths are kept verbatim and not
    dereferenced here."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise BadHeader("empty manifest") from None
    if header != MANIFEST_HEADER:
        raise BadHeader(f"expected header {','.join(MANIFEST_HEADER)!r}, got {','.join(header)!r}")

    entries = []
    seen = set()
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise BadRow(f"line {line_no}: expected {len(MANIFEST_HEADER)} cells, got {len(row)}")
        utt_id, audio_path, trillsson_path, xvector_path, score_text = (c.strip() for c in row)
        if not utt_id:
            raise BadRow(f"line {line_no}: empty id")
        if utt_id in seen:
            raise DuplicateId(f"line {line_no}: id {utt_id!r} appears twice")
        seen.add(utt_id)
        try:
            score = float(score_text)
        except ValueError:
            raise BadRow(f"line {line_no}: unparseable score {score_text!r}") from None
        if not math.isfinite(score) or not SCORE_MIN <= score <= SCORE_MAX:
            raise ScoreOutOfRange(f"line {line_no}: score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")
        emb_paths = {}
        if trillsson_path:
            emb_paths["trillsson"] = trillsson_path
        if xvector_path:
            emb_paths["xvector"] = xvector_path
        entries.append(ManifestEntry(
            id=utt_id,
            audio_path=audio_path or None,
            embedding_paths=emb_paths,
            score=score,
        ))
    return entries


def split_dataset(entries, ratios, seed: int):
    """Seed-deterministic shuffle + partition into (train, dev, test).

    Sizes are floor(n * ratio) for train and dev; the remainder is test.
    """
    entries = list(entries)
    if not entries:
        raise Empty("cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(len(entries))
    shuffled = [entries[i] for i in order]
    n_train = int(len(entries) * ratios[0])
    n_dev = int(len(entries) * ratios[1])
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


def spectral_cfg_for(source: str, cfg: SpectralConfig) -> SpectralConfig:
    return replace(cfg, scale=MEL_SCALE if source == "mfcc" else LINEAR_SCALE)


def _load_clip_16k(path: Path) -> audio_io.AudioClip:
    clip = audio_io.decode_wav(path.read_bytes())
    return audio_io.resample(audio_io.to_mono(clip), MODEL_SAMPLE_RATE)


def assemble_features(entry: ManifestEntry, feature_set, spectral_cfg: SpectralConfig,
                      base_dir: Path | str = ".") -> list[FeatureVector]:
    """Resolve each source of feature_set for one utterance, in order.

    Relative manifest paths resolve against base_dir (normally the manifest's
    own directory).
    """
    base = Path(base_dir)
    vectors = []
    clip = None
    for source in feature_set:
        if source in SPECTRAL_SOURCES:
            if not entry.audio_path:
                raise MissingArtifact(f"{entry.id}: no audio path but {source} requested")
            path = base / entry.audio_path
            if not path.is_file():
                raise MissingArtifact(f"{entry.id}: audio file {path} not found")
            if clip is None:
                clip = _load_clip_16k(path)
            frames = cepstral_features(clip, spectral_cfg_for(source, spectral_cfg))
            vectors.append(temporal_mean_pool(frames, source))
        else:
            rel = entry.embedding_paths.get(source)
            if not rel:
                raise MissingArtifact(f"{entry.id}: no {source} embedding path")
            path = base / rel
            if not path.is_file():
                raise MissingArtifact(f"{entry.id}: embedding file {path} not found")
            vectors.append(embeddings.load_embedding(path.read_bytes(), expected_source=source))
    return vectors


def _metrics(preds: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
    err = preds - targets
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err ** 2)))


def _predict_all(model: neuralnet.FusionModel, inputs_list) -> np.ndarray:
    return np.array([neuralnet.forward(model, inputs) for inputs in inputs_list])


def train(entries, train_cfg: TrainConfig, spectral_cfg: SpectralConfig | None = None,
          base_dir: Path | str = "."):
    """Train the fusion regressor on a manifest's entries.

    Mini-batch Adam on MSE; per-epoch JSON-ready log records of train loss
    and dev MAE/RMSE; early stopping on dev RMSE with best-epoch weight
    restore. Returns (model, log). Deterministic for a fixed
    (seed, entry order, config).
    """
    spectral_cfg = spectral_cfg or SpectralConfig()
    train_set, dev_set, _ = split_dataset(entries, train_cfg.split_ratios, train_cfg.seed)
    if not train_set:
        raise NoTrainData("train ratio yields zero training entries")

    feats = {
        e.id: assemble_features(e, train_cfg.feature_set, spectral_cfg, base_dir)
        for e in (*train_set, *dev_set)
    }
    dims = {}
    for vecs in feats.values():
        for v in vecs:
            dims.setdefault(v.source, v.dim)
            if dims[v.source] != v.dim:
                raise ValueError(f"inconsistent {v.source} dims: {dims[v.source]} vs {v.dim}")

    model_cfg = neuralnet.ModelConfig(
        branches=tuple((s, dims[s]) for s in train_cfg.feature_set),
        dropout_p=train_cfg.dropout_p,
        seed=train_cfg.seed,
    )
    model = neuralnet.init_model(model_cfg)
    state = neuralnet.AdamState.for_params(model.params, lr=train_cfg.lr)
    rng = np.random.default_rng([train_cfg.seed, 1])  # shuffles + dropout masks

    train_ids = [e.id for e in train_set]
    train_targets = {e.id: e.score for e in train_set}
    dev_inputs = [feats[e.id] for e in dev_set]
    dev_targets = np.array([e.score for e in dev_set])

    log = []
    best_rmse = math.inf
    best_params = neuralnet.clone_params(model.params)
    best_seen = train_cfg.epochs == 0
    since_best = 0

    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(len(train_ids))
        epoch_loss = 0.0
        for start in range(0, len(order), train_cfg.batch_size):
            chunk = order[start : start + train_cfg.batch_size]
            batch = [(feats[train_ids[i]], train_targets[train_ids[i]]) for i in chunk]
            loss, grads = neuralnet.loss_and_gradients(model, batch, rng)
            neuralnet.adam_step(state, model.params, grads)
            epoch_loss += loss * len(chunk)
        record = {"epoch": epoch, "train_mse": epoch_loss / len(train_ids),
                  "dev_mae": None, "dev_rmse": None}

        if dev_set:
            dev_mae, dev_rmse = _metrics(_predict_all(model, dev_inputs), dev_targets)
            record["dev_mae"], record["dev_rmse"] = dev_mae, dev_rmse
            if dev_rmse < best_rmse:
                best_rmse = dev_rmse
                best_params = neuralnet.clone_params(model.params)
                best_seen = True
                since_best = 0
            else:
                since_best += 1
        log.append(record)
        if dev_set and since_best >= train_cfg.early_stop_patience:
            break

    if dev_set and best_seen:
        model = neuralnet.FusionModel(config=model_cfg, params=best_params)
    return model, log


def evaluate(model: neuralnet.FusionModel, entries, feature_set,
             spectral_cfg: SpectralConfig | None = None,
             base_dir: Path | str = ".") -> EvalReport:
    """MAE/RMSE of infer-mode (unclamped) predictions against the labels."""
    entries = list(entries)
    if not entries:
        raise Empty("cannot evaluate on zero entries")
    spectral_cfg = spectral_cfg or SpectralConfig()
    inputs = [assemble_features(e, feature_set, spectral_cfg, base_dir) for e in entries]
    preds = _predict_all(model, inputs)
    targets = np.array([e.score for e in entries])
    mae, rmse = _metrics(preds, targets)
    return EvalReport(mae=mae, rmse=rmse, n=len(entries), feature_set=tuple(feature_set),
                      model_version=neuralnet.model_digest(model)[:12])


def severity_band(score: float) -> tuple[float, str]:
    """Clamp a raw score to [0, 24] and name its severity band."""
    if not math.isfinite(score):
        raise NonFinite(f"score must be finite, got {score}")
    display = min(max(float(score), SCORE_MIN), SCORE_MAX)
    for upper, band in SEVERITY_BANDS:
        if display < upper:
            return display, band
    return display, SEVERITY_BANDS[-1][1]
