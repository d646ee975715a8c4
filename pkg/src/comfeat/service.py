"""HTTP serving: the upload -> preprocess -> predict -> respond loop.

One POST carries the WAV (field "audio") plus one CFEM part per neural
branch (repeatable field "embedding"; each part's header names its source).
The reply to that POST is the Prediction JSON. Spectral branches are
computed server-side from the uploaded audio; neural embeddings arrive
precomputed because the pretrained models are out of scope here.

Routes (JSON, UTF-8):
    POST /api/v1/predict   multipart/form-data
    GET  /api/v1/health
    GET  /api/v1/model
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import audio_io, embeddings, neuralnet
from .pipeline import severity_band, spectral_cfg_for
from .spectral import SPECTRAL_SOURCES, SpectralConfig, cepstral_features, temporal_mean_pool

MODEL_PATH_ENV = "COMFEAT_MODEL"
DEFAULT_MAX_UPLOAD = 50 * 1024 * 1024


@dataclass(frozen=True)
class Prediction:
    """What the client renders: the raw regression output, its clamped
    display value, and the severity band."""

    raw_score: float
    display_score: float
    band: str
    feature_set: tuple
    model_version: str
    processing_ms: float

    def to_dict(self) -> dict:
        return {
            "raw_score": self.raw_score,
            "display_score": self.display_score,
            "band": self.band,
            "feature_set": list(self.feature_set),
            "model_version": self.model_version,
            "processing_ms": self.processing_ms,
        }


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    model_path: str | None = None
    spectral_config: str | None = None
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    allow_origins: tuple = ("*",)


def parse_service_config(text: str) -> ServiceConfig:
    """Parse the key=value service config grammar.

    One `key = value` per line; blank lines and lines starting with `#` are
    ignored; values are taken verbatim (no quoting). `allow_origins` is a
    comma-separated list. Unknown keys are rejected.
    """
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in ("port", "max_upload_bytes"):
            values[key] = int(value)
        elif key == "allow_origins":
            values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in ("host", "model_path", "spectral_config"):
            values[key] = value
        else:
            raise ValueError(f"line {line_no}: unknown key {key!r}")
    return ServiceConfig(**values)


def load_spectral_config(path: str | None) -> SpectralConfig:
    if not path:
        return SpectralConfig()
    doc = json.loads(Path(path).read_text())
    return SpectralConfig(**doc)


def resolve_model_path(config: ServiceConfig) -> str | None:
    return os.environ.get(MODEL_PATH_ENV) or config.model_path


class PredictError(Exception):
    """Maps pipeline failures onto HTTP statuses."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def run_prediction(model: neuralnet.FusionModel, spectral_cfg: SpectralConfig,
                   audio_bytes: bytes, embedding_parts=()) -> Prediction:
    """The full request pipeline on in-memory bytes.

    decode -> mono -> 16 kHz -> per-branch features (spectral from the
    audio, neural from the CFEM parts, matched by their source tags) ->
    infer-mode forward -> severity band. Raises PredictError with the
    documented HTTP status on any failure.
    """
    started = time.perf_counter()
    try:
        clip = audio_io.decode_wav(audio_bytes)
    except audio_io.TooLong as exc:
        raise PredictError(413, str(exc)) from exc
    except audio_io.UnsupportedFormat as exc:
        raise PredictError(415, str(exc)) from exc
    except audio_io.MalformedFile as exc:
        raise PredictError(400, str(exc)) from exc
    clip = audio_io.resample(audio_io.to_mono(clip), audio_io.MODEL_SAMPLE_RATE)

    by_source: dict = {}
    for part in embedding_parts:
        try:
            source = embeddings.peek_source(part)
        except embeddings.DimensionMismatch as exc:
            raise PredictError(422, str(exc)) from exc
        except embeddings.EmbeddingFormatError as exc:
            raise PredictError(400, f"bad embedding part: {exc}") from exc
        if source in by_source:
            raise PredictError(422, f"duplicate embedding part for source {source!r}")
        by_source[source] = part

    inputs = []
    feature_set = tuple(s for s, _ in model.config.branches)
    for source in feature_set:
        if source in SPECTRAL_SOURCES:
            try:
                frames = cepstral_features(clip, spectral_cfg_for(source, spectral_cfg))
            except Exception as exc:
                raise PredictError(400, f"spectral extraction failed: {exc}") from exc
            inputs.append(temporal_mean_pool(frames, source))
        else:
            part = by_source.get(source)
            if part is None:
                raise PredictError(422, f"model needs a {source!r} embedding part")
            try:
                inputs.append(embeddings.load_embedding(part, expected_source=source))
            except embeddings.DimensionMismatch as exc:
                raise PredictError(422, str(exc)) from exc
            except embeddings.EmbeddingFormatError as exc:
                raise PredictError(400, f"bad {source} embedding: {exc}") from exc

    try:
        raw = neuralnet.forward(model, inputs)
    except neuralnet.BranchMismatch as exc:
        raise PredictError(422, str(exc)) from exc
    display, band = severity_band(raw)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return Prediction(
        raw_score=raw,
        display_score=display,
        band=band,
        feature_set=feature_set,
        model_version=neuralnet.model_digest(model)[:12],
        processing_ms=elapsed_ms,
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    """Build the FastAPI application. The model is loaded once at startup
    and shared read-only across requests."""
    config = config or ServiceConfig()
    spectral_cfg = load_spectral_config(config.spectral_config)

    model: neuralnet.FusionModel | None = None
    model_path = resolve_model_path(config)
    if model_path:
        model = neuralnet.load_weights(Path(model_path).read_bytes())
        _check_spectral_consistency(model, spectral_cfg)

    app = FastAPI(title="comfeat", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.allow_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.model = model
    app.state.spectral_cfg = spectral_cfg

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "model_loaded": app.state.model is not None}

    @app.get("/api/v1/model")
    def model_info():
        loaded = app.state.model
        if loaded is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        digest = neuralnet.model_digest(loaded)
        return {
            "feature_set": [s for s, _ in loaded.config.branches],
            "branch_dims": {s: d for s, d in loaded.config.branches},
            "conv_filters": loaded.config.conv_filters,
            "kernel_size": loaded.config.kernel_size,
            "fcn_dims": list(loaded.config.fcn_dims),
            "model_version": digest[:12],
            "weights_sha256": digest,
        }

    @app.post("/api/v1/predict")
    async def predict(request: Request):
        loaded = app.state.model
        if loaded is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})

        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > config.max_upload_bytes:
            return JSONResponse(status_code=413, content={"error": "payload too large"})
        try:
            form = await request.form()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "malformed multipart body"})

        audio_part = form.get("audio")
        if audio_part is None or isinstance(audio_part, str):
            return JSONResponse(status_code=400, content={"error": "missing audio part"})
        audio_bytes = await audio_part.read()

        embedding_parts = []
        total = len(audio_bytes)
        for part in form.getlist("embedding"):
            if isinstance(part, str):
                return JSONResponse(status_code=400, content={"error": "embedding part must be a file"})
            data = await part.read()
            total += len(data)
            embedding_parts.append(data)
        if total > config.max_upload_bytes:
            return JSONResponse(status_code=413, content={"error": "payload too large"})

        try:
            prediction = run_prediction(loaded, app.state.spectral_cfg, audio_bytes, embedding_parts)
        except PredictError as exc:
            return JSONResponse(status_code=exc.status, content={"error": exc.message})
        return prediction.to_dict()

    return app


def _check_spectral_consistency(model: neuralnet.FusionModel, cfg: SpectralConfig):
    for source, dim in model.config.branches:
        if source in SPECTRAL_SOURCES and dim != cfg.n_coeffs:
            raise neuralnet.ConfigMismatch(
                f"model {source} branch expects {dim} coefficients, "
                f"spectral config produces {cfg.n_coeffs}"
            )


def serve(config: ServiceConfig):
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
