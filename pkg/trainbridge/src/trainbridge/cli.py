"""Thin command-line wrapper around the three harness operations."""

import argparse
import sys

from trainbridge.errors import TrainBridgeError
from trainbridge.model import TinyModelConfig
from trainbridge.training import StageConfig, extend_embeddings, finetune_summarize, retrain_mlm


def _stage_args(p: argparse.ArgumentParser, stage: str):
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    if stage == "retrain":
        p.add_argument("--holdout-fraction", type=float, default=0.1)
    else:
        p.add_argument("--beam-size", type=int, default=5)
        p.add_argument("--no-repeat-ngram", type=int, default=2)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="trainbridge", description=__doc__)
    subs = ap.add_subparsers(dest="command", required=True)

    p = subs.add_parser("retrain", help="masked-token re-training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-dir", required=True)
    _stage_args(p, "retrain")

    p = subs.add_parser("finetune", help="summarization fine-tuning")
    p.add_argument("--pairs", required=True)
    p.add_argument("--eval-pairs", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    _stage_args(p, "finetune")

    p = subs.add_parser("extend", help="grow checkpoint embeddings to an extended vocabulary")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--old-vocab", required=True)
    p.add_argument("--new-vocab", required=True)
    p.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    try:
        if args.command == "retrain":
            manifest = retrain_mlm(
                args.corpus,
                args.vocab,
                args.out_dir,
                StageConfig(
                    stage="retrain",
                    epochs=args.epochs,
                    seed=args.seed,
                    learning_rate=args.learning_rate,
                    batch_size=args.batch_size,
                    holdout_fraction=args.holdout_fraction,
                ),
                TinyModelConfig(),
            )
        elif args.command == "finetune":
            manifest = finetune_summarize(
                args.pairs,
                args.checkpoint,
                args.vocab,
                args.out,
                StageConfig(
                    stage="finetune",
                    epochs=args.epochs,
                    seed=args.seed,
                    learning_rate=args.learning_rate,
                    batch_size=args.batch_size,
                    beam_size=args.beam_size,
                    no_repeat_ngram=args.no_repeat_ngram,
                ),
                TinyModelConfig(),
                eval_pairs_path=args.eval_pairs,
            )
        else:
            manifest = extend_embeddings(args.checkpoint, args.old_vocab, args.new_vocab, args.out)
    except (TrainBridgeError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for key, value in manifest.items():
        if not isinstance(value, (dict, list)):
            print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
