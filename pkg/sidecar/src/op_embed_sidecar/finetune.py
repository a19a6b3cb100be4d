"""Optional: adapt the sentence encoder on a contrastive triplet JSONL.

Trains with multiple-negatives ranking loss (in-batch negatives; the scale
factor is the inverse softmax temperature, tuned operating point 40).  This
needs GPU-class hardware and the sentence-transformers training stack; the
scoring engine never depends on its output, it only consumes whatever model
the sidecar serves.

Usage:
    python -m op_embed_sidecar.finetune triplets.jsonl ./tuned-model \
        --base sentence-transformers/paraphrase-mpnet-base-v2 --scale 40
"""

from __future__ import annotations

import argparse
import json
import sys


def load_triplets(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("triplets", help="triplet JSONL (anchor/positive/negative per row)")
    parser.add_argument("out_dir", help="directory for the tuned model")
    parser.add_argument("--base", default="sentence-transformers/paraphrase-mpnet-base-v2")
    parser.add_argument("--scale", type=float, default=40.0, help="similarity scale (inverse temperature)")
    parser.add_argument("--epochs", type=int, default=1)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--warmup-ratio", type=float, default=0.0325)
    parser.add_argument("--device", default=None)
    args = parser.parse_args(argv)

    try:
        from sentence_transformers import InputExample, SentenceTransformer, losses
        from torch.utils.data import DataLoader
    except ImportError as exc:
        print(f"fine-tuning needs the sbert extra installed: {exc}", file=sys.stderr)
        return 2

    rows = load_triplets(args.triplets)
    if not rows:
        print("no triplets found", file=sys.stderr)
        return 2
    examples = [InputExample(texts=[r["anchor"], r["positive"], r["negative"]]) for r in rows]

    model = SentenceTransformer(args.base, device=args.device)
    loader = DataLoader(examples, shuffle=True, batch_size=args.batch_size)
    loss = losses.MultipleNegativesRankingLoss(model, scale=args.scale)
    warmup_steps = int(len(loader) * args.epochs * args.warmup_ratio)
    model.fit(train_objectives=[(loader, loss)], epochs=args.epochs,
              warmup_steps=warmup_steps, output_path=args.out_dir)
    print(f"saved tuned model to {args.out_dir}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
