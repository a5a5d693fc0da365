"""Command-line wrapper around export_embeddings."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import DEFAULT_MODEL, EmbedJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode post texts with a pre-trained transformer and "
                    "write an EMB1 embedding matrix plus a .meta sidecar")
    parser.add_argument("--input", required=True, help="posts.jsonl path")
    parser.add_argument("--out", required=True, help="output .emb1 path")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"encoder name or path (default {DEFAULT_MODEL})")
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--device", default="cpu",
                        help="torch device hint (default cpu)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    job = EmbedJob(input_path=args.input, output_path=args.out,
                   model_name=args.model, batch_size=args.batch,
                   device=args.device)
    try:
        n = export_embeddings(job)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
