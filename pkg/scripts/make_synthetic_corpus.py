#!/usr/bin/env python3
"""Generate a seeded synthetic corpus (CFEM embeddings, optional tone WAVs,
manifest CSV) for training and evaluation runs without the restricted
clinical data.

Example:
    python scripts/make_synthetic_corpus.py --out data/synth --n 200 --audio
"""

import argparse

from comfeat.synthetic import build_synthetic_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n", type=int, default=200, help="number of utterances")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--source", default="trillsson", choices=["trillsson", "xvector"])
    parser.add_argument("--audio", action="store_true",
                        help="also synthesize tone WAVs so mfcc/lfcc branches can train")
    parser.add_argument("--audio-weight", type=float, default=0.0,
                        help="fraction of the label driven by the tone (needs --audio)")
    args = parser.parse_args()

    manifest = build_synthetic_corpus(
        args.out, n_utterances=args.n, seed=args.seed,
        embedding_source=args.source, with_audio=args.audio,
        audio_weight=args.audio_weight if args.audio else 0.0,
    )
    print(manifest)


if __name__ == "__main__":
    main()
