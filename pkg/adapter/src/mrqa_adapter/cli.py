"""mrqa-to-records: convert QA artifacts into the prediction-record format."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import AdapterError, convert


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrqa-to-records",
        description=(
            "Convert an MRQA-format gold file and an n-best prediction file "
            "(optionally one per dropout mask) into prediction records."
        ),
    )
    parser.add_argument("gold", help="MRQA-format gold file (jsonl)")
    parser.add_argument("nbest", help="n-best predictions (json: qid -> candidates)")
    parser.add_argument("--domain", required=True, help="domain tag for the records")
    parser.add_argument("--out", required=True, help="output record file")
    parser.add_argument(
        "--dropout-nbest",
        nargs="+",
        default=[],
        metavar="FILE",
        help="per-dropout-mask n-best files sharing the main qid set",
    )
    parser.add_argument(
        "--strict-single-answer",
        action="store_true",
        help="score exact match against the first gold answer only",
    )
    parser.add_argument(
        "--squad2",
        action="store_true",
        help="allow unanswerable questions (empty gold answers) and emit the answerable flag",
    )
    parser.add_argument(
        "--qid-allowlist",
        default="",
        help="file with one qid per line; only these qids are converted",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    allowlist = None
    if args.qid_allowlist:
        allowlist = {
            line.strip()
            for line in Path(args.qid_allowlist).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
    try:
        written = convert(
            gold_path=args.gold,
            nbest_path=args.nbest,
            domain=args.domain,
            out_path=args.out,
            dropout_nbest_paths=list(args.dropout_nbest),
            strict_single_answer=args.strict_single_answer,
            squad2=args.squad2,
            qid_allowlist=allowlist,
        )
    except (AdapterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.out}: wrote {written} records")
    return 0


if __name__ == "__main__":
    sys.exit(main())
