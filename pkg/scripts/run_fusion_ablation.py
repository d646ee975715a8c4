#!/usr/bin/env python3
"""Ablation run: train single-branch and fused models under identical seeds
on a synthetic corpus whose label mixes a neural and a spectral signal, then
print a small MAE/RMSE table on the held-out test split.

Example:
    python scripts/run_fusion_ablation.py --workdir /tmp/ablation --epochs 80
"""

import argparse
from pathlib import Path

from comfeat import pipeline
from comfeat.synthetic import build_synthetic_corpus

FEATURE_SETS = [("trillsson",), ("mfcc",), ("trillsson", "mfcc")]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--epochs", type=int, default=80)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    manifest = build_synthetic_corpus(workdir, n_utterances=args.n, seed=args.seed,
                                      with_audio=True, audio_weight=0.5)
    entries = pipeline.load_manifest(manifest.read_text())

    rows = []
    for feature_set in FEATURE_SETS:
        cfg = pipeline.TrainConfig(feature_set=feature_set, epochs=args.epochs,
                                   dropout_p=0.0, seed=args.seed,
                                   split_ratios=(0.7, 0.15),
                                   early_stop_patience=args.epochs)
        model, log = pipeline.train(entries, cfg, base_dir=workdir)
        _, _, test = pipeline.split_dataset(entries, cfg.split_ratios, cfg.seed)
        report = pipeline.evaluate(model, test, feature_set, base_dir=workdir)
        best_dev = min(r["dev_rmse"] for r in log)
        rows.append(("+".join(feature_set), best_dev, report))

    print(f"{'features':<18} {'dev RMSE':>9} {'test MAE':>9} {'test RMSE':>10}")
    for name, best_dev, report in rows:
        print(f"{name:<18} {best_dev:>9.3f} {report.mae:>9.3f} {report.rmse:>10.3f}")


if __name__ == "__main__":
    main()
