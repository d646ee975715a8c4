"""Command-line surface: extract / train / eval / predict / serve.

Exit codes: 0 on success, 1 on a runtime error (message on stderr), 2 on a
usage error (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import audio_io, embeddings, neuralnet, pipeline, service
from .spectral import SPECTRAL_SOURCES, SpectralConfig, cepstral_features

ALL_FEATURES = ("mfcc", "lfcc", "trillsson", "xvector")


def _spectral_from_args(args) -> SpectralConfig:
    return service.load_spectral_config(getattr(args, "spectral_config", None))


def _read_manifest(path: str):
    return pipeline.load_manifest(Path(path).read_text()), Path(path).parent


def _parse_features(text: str):
    features = tuple(f.strip() for f in text.split(",") if f.strip())
    for f in features:
        if f not in ALL_FEATURES:
            raise ValueError(f"unknown feature {f!r}; choose from {', '.join(ALL_FEATURES)}")
    if not features:
        raise ValueError("empty feature list")
    return features


def cmd_extract(args) -> int:
    cfg = _spectral_from_args(args)
    sources = _parse_features(args.features)
    spectral_only = [s for s in sources if s in SPECTRAL_SOURCES]
    if not spectral_only:
        raise ValueError("extract computes spectral features; pick mfcc and/or lfcc")

    out_dir = Path(args.outdir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def extract_one(wav_path: Path, stem: str):
        clip = audio_io.decode_wav(wav_path.read_bytes())
        clip = audio_io.resample(audio_io.to_mono(clip), audio_io.MODEL_SAMPLE_RATE)
        for source in spectral_only:
            frames = cepstral_features(clip, pipeline.spectral_cfg_for(source, cfg))
            # frame matrices are exported with the generic source code; the
            # tag enum only names the neural sources
            out = out_dir / f"{stem}.{source}.cfem"
            out.write_bytes(embeddings.store_embedding(frames, "other"))
            print(out)

    if args.audio:
        wav = Path(args.audio)
        extract_one(wav, wav.stem)
    elif args.manifest:
        entries, base = _read_manifest(args.manifest)
        for entry in entries:
            if not entry.audio_path:
                continue
            extract_one(base / entry.audio_path, entry.id)
    else:
        raise ValueError("extract needs --audio or --manifest")
    return 0


def cmd_train(args) -> int:
    entries, base = _read_manifest(args.manifest)
    cfg = pipeline.TrainConfig(
        feature_set=_parse_features(args.features),
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        dropout_p=args.dropout,
        seed=args.seed,
        split_ratios=tuple(float(r) for r in args.split.split(",")),
        early_stop_patience=args.patience,
    )
    model, log = pipeline.train(entries, cfg, _spectral_from_args(args), base_dir=base)
    Path(args.out).write_bytes(neuralnet.save_weights(model))
    if args.log:
        with open(args.log, "w") as fh:
            for record in log:
                fh.write(json.dumps(record) + "\n")
    print(f"wrote {args.out} ({neuralnet.model_digest(model)[:12]})")
    return 0


def cmd_eval(args) -> int:
    entries, base = _read_manifest(args.manifest)
    model = neuralnet.load_weights(Path(args.model).read_bytes())
    feature_set = tuple(s for s, _ in model.config.branches)
    report = pipeline.evaluate(model, entries, feature_set, _spectral_from_args(args),
                               base_dir=base)
    print(json.dumps(report.to_dict()))
    return 0


def cmd_predict(args) -> int:
    model = neuralnet.load_weights(Path(args.model).read_bytes())
    audio_bytes = Path(args.audio).read_bytes()
    parts = [Path(p).read_bytes() for p in args.embedding or []]
    prediction = service.run_prediction(model, _spectral_from_args(args), audio_bytes, parts)
    print(json.dumps(prediction.to_dict()))
    return 0


def cmd_serve(args) -> int:
    if args.config:
        cfg = service.parse_service_config(Path(args.config).read_text())
    else:
        cfg = service.ServiceConfig()
    if args.host:
        cfg = replace(cfg, host=args.host)
    if args.port:
        cfg = replace(cfg, port=args.port)
    if args.model:
        cfg = replace(cfg, model_path=args.model)
    if service.resolve_model_path(cfg) is None:
        raise ValueError("no model: pass --model, set model_path in --config, "
                         f"or set ${service.MODEL_PATH_ENV}")
    service.serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comfeat",
                                     description="speech severity regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute spectral feature files from audio")
    p.add_argument("--audio", help="one WAV file")
    p.add_argument("--manifest", help="manifest CSV; extracts for every row with audio")
    p.add_argument("--features", default="mfcc,lfcc")
    p.add_argument("--outdir", default=".")
    p.add_argument("--spectral-config", dest="spectral_config")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="train fusion weights from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="comma-separated, fusion order")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="0.7,0.15", help="train,dev ratios; rest is test")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--out", required=True, help="output weight file (.cfwt)")
    p.add_argument("--log", help="per-epoch JSONL training log")
    p.add_argument("--spectral-config", dest="spectral_config")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="MAE/RMSE of a weight file on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--spectral-config", dest="spectral_config")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="score one WAV (plus CFEM parts for neural branches)")
    p.add_argument("--model", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--embedding", action="append", help="CFEM file; repeatable")
    p.add_argument("--spectral-config", dest="spectral_config")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="key=value service config file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--model")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
