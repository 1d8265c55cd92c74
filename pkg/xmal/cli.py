"""Command line interface for the alignment toolkit."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, NoReturn

from .config import RunConfig
from .errors import ConfigError, DataError, XmalError
from .main import AlignmentPipeline

LOGGER = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage()
        self.exit(1, f"{self.prog}: error: {message}\n")


def configure_logging(verbose: bool = False, log_file: Path | None = None) -> None:
    """Configure root logging once per CLI invocation.

    ``--verbose`` forces DEBUG; otherwise ``XMAL_LOG`` picks the level.
    """

    requested = os.environ.get("XMAL_LOG", "INFO").upper()
    level_name = "DEBUG" if verbose else requested if requested in LOG_LEVELS else "INFO"
    logging.basicConfig(
        level=getattr(logging, level_name),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        filename=str(log_file) if log_file else None,
        force=True,
    )
    if not verbose and requested not in LOG_LEVELS:
        LOGGER.warning("Unknown XMAL_LOG level %r; using INFO", requested)


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="xmal", description="Cross-modal alignment distillation toolkit")
    parser.add_argument("--config", type=Path, help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out", type=Path, help="Override paths.out_dir")
    parser.add_argument("--data-dir", type=Path, help="Override paths.data_dir")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    parser.add_argument("--log-file", type=Path, help="Write log records to this file instead of stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("synth", help="Generate a synthetic paired audio/text corpus")
    subparsers.add_parser("extract-psych", help="Score transcripts with the psych lexicon")
    subparsers.add_parser("build-targets", help="Split persons and build alignment targets")

    train_parser = subparsers.add_parser("train", help="Align a student encoder to the targets")
    train_parser.add_argument("--loss", choices=["cs", "nce"], help="Override train.loss")
    train_parser.add_argument("--epochs", type=int, help="Override train.epochs")

    embed_parser = subparsers.add_parser("embed", help="Export student embeddings for a manifest")
    embed_parser.add_argument("--checkpoint", type=Path, help="Checkpoint directory (default: <out>/checkpoint)")
    embed_parser.add_argument("--manifest", type=Path, help="Manifest to embed (default: paths.manifest)")
    embed_parser.add_argument("--output", type=Path, help="Store path (default: <out>/embeddings.xmal)")

    eval_parser = subparsers.add_parser("eval", help="Person-level ridge evaluation of embedding stores")
    eval_parser.add_argument(
        "--store",
        action="append",
        default=[],
        metavar="NAME=PATH",
        help="Embedding store to evaluate; repeat to compare models",
    )
    eval_parser.add_argument("--baseline", help="Model name that significance markers compare against")

    analyze_parser = subparsers.add_parser("analyze", help="Overlap, heatmap, and n-gram analyses")
    analyze_parser.add_argument("--render", action="store_true", help="Also draw PNG figures (needs matplotlib)")

    subparsers.add_parser("report", help="Train CS and NCE students and compare them with the untrained one")
    return parser


def parse_stores(values: List[str]) -> Dict[str, Path]:
    stores: Dict[str, Path] = {}
    for value in values:
        name, separator, path = value.partition("=")
        if not separator or not name or not path:
            raise ConfigError(f"--store expects NAME=PATH, got {value!r}")
        if name in stores:
            raise ConfigError(f"Duplicate store name {name!r}")
        stores[name] = Path(path)
    return stores


def run(args: argparse.Namespace) -> None:
    config = RunConfig.load(args.config).override(seed=args.seed, out_dir=args.out)
    if args.data_dir is not None:
        config.paths.data_dir = str(args.data_dir)
    pipeline = AlignmentPipeline(config)

    if args.command == "synth":
        pipeline.synth()
    elif args.command == "extract-psych":
        pipeline.extract_psych()
    elif args.command == "build-targets":
        pipeline.build_targets()
    elif args.command == "train":
        if args.loss:
            config.train.loss = args.loss
        if args.epochs is not None:
            config.train.epochs = args.epochs
        pipeline.train()
    elif args.command == "embed":
        if args.manifest is not None:
            config.paths.manifest = str(args.manifest)
        pipeline.embed(checkpoint=args.checkpoint, output=args.output)
    elif args.command == "eval":
        stores = parse_stores(args.store)
        for name, path in stores.items():
            if not path.exists():
                raise DataError(f"Store {name!r} not found: {path}")
        pipeline.evaluate(stores or None, baseline=args.baseline)
    elif args.command == "analyze":
        pipeline.analyze(render=True if args.render else None)
    elif args.command == "report":
        pipeline.report()


def main(argv: List[str] | None = None) -> None:
    """Entrypoint used by ``python -m xmal`` and the ``xmal`` script."""

    parser = build_parser()
    args = parser.parse_args(argv)

    configure_logging(args.verbose, args.log_file)

    try:
        run(args)
    except XmalError as exc:
        LOGGER.error("%s: %s", args.command, exc)
        _exit(args, str(exc), exc.exit_code)
    except OSError as exc:
        LOGGER.error("%s: %s", args.command, exc)
        _exit(args, str(exc), DataError.exit_code)
    except Exception as exc:  # pragma: no cover - unexpected failures
        LOGGER.exception("Unhandled error: %s", exc)
        _exit(args, f"unexpected {type(exc).__name__}: {exc}", 1)


def _exit(args: argparse.Namespace, message: str, exit_code: int) -> NoReturn:
    """Exit with ``exit_code``; log records sent to ``--log-file`` also get one line on stderr."""

    if args.log_file is not None:
        print(f"xmal {args.command}: error: {message}", file=sys.stderr)
    raise SystemExit(exit_code)


if __name__ == "__main__":
    main()
