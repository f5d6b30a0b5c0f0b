"""Command line front end: flags mirror the ExportManifest fields."""

import argparse
import sys

from embedding_exporter.errors import (CorpusFormatError, DependencyError,
                                       ExportError)
from embedding_exporter.export import ExportManifest, export_embeddings


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embedding-exporter",
        description="Export pooled text vectors and 7-class emotion "
                    "distributions for every post in a JSONL corpus.")
    parser.add_argument("--corpus", required=True,
                        help="JSONL corpus, one user per line")
    parser.add_argument("--out", required=True,
                        help="destination interchange file")
    parser.add_argument("--text-model", required=True,
                        help="pretrained text encoder identifier or path")
    parser.add_argument("--emotion-model", required=True,
                        help="pretrained 7-label classifier identifier or path")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu",
                        help="torch device hint, e.g. cpu or cuda:0")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest = ExportManifest(corpus_path=args.corpus, output_path=args.out,
                              text_model=args.text_model,
                              emotion_model=args.emotion_model,
                              batch_size=args.batch_size, device=args.device)
    try:
        count = export_embeddings(manifest)
    except DependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CorpusFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
