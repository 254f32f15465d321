"""featexport command line: export-features | export-predictions."""

from __future__ import annotations

import argparse
import sys

from .export import ExportJob, export_features, export_predictions
from .formats import DatasetFormatError
from .model import CheckpointError


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--checkpoint", required=True, help="torch checkpoint path")
    common.add_argument("--dataset", required=True, help="image batch file")
    common.add_argument("--out", required=True, help="output file path")
    common.add_argument("--batch-size", type=int, default=256)
    common.add_argument("--device", default="cpu")
    parser = argparse.ArgumentParser(
        prog="featexport", description="Export encoder features and predictions"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("export-features", parents=[common])
    sub.add_parser("export-predictions", parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        checkpoint=args.checkpoint,
        dataset=args.dataset,
        output=args.out,
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        if args.command == "export-features":
            export_features(job)
        else:
            export_predictions(job)
    except (CheckpointError, DatasetFormatError, OSError) as exc:
        print(f"featexport: error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())
