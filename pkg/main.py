"""
leafaug

Leaf-disease dataset pipeline: mask and resize images, split and balance
them with generated samples, train a reference classifier under online
augmentations, evaluate real vs synthetic data, embed features with t-SNE
and evaluate GAN objectives on fixtures.

Usage:
    python main.py make-fixture DIR
    python main.py prepare --config DIR/config.json
    python main.py split --config DIR/config.json
    ...

Exit codes: 0 success, 1 internal error, 2 configuration or usage error, 3 data error.
"""
import argparse
import os
import sys
from typing import List, Optional

# Add the project root directory to Python path
project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.constants import EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, RUN_META_DIR, VERSION
from config.env_loader import load_log_level
from config.settings_manager import load_pipeline_config
from services.pipeline import COMMANDS, cmd_make_fixture, run_command
from utils.errors import ConfigError, DataError
from utils.log import setup_logger


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafaug",
        description="Leaf-disease data pipeline with offline and online augmentation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("--config", help="JSON run configuration")
        cmd.add_argument("--seed", type=_seed, help="override master_seed")
        cmd.add_argument("--out", help="override the output directory")
        cmd.add_argument("--aug", help="augmentation name(s), comma-separated, e.g. rotflip+fmix")
        if name == "augment-preview":
            cmd.add_argument("--replay", help="re-apply the event stored in a preview sidecar JSON")

    fixture = sub.add_parser("make-fixture", help="write a procedural fixture corpus")
    fixture.add_argument("directory", help="target directory")
    fixture.add_argument("--seed", type=_seed, default=0, help="fixture seed")
    fixture.add_argument("--no-artifact", action="store_true",
                         help="do not stamp the class-correlated band on synthetic images")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logger = setup_logger(load_log_level())
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    try:
        if args.command == "make-fixture":
            paths = cmd_make_fixture(args.directory, args.seed, artifact=not args.no_artifact)
            logger.info("Fixture config written to %s", paths["config"])
            return EXIT_OK

        manager, cfg = load_pipeline_config(args.config, seed=args.seed, out=args.out, aug=args.aug)
        kwargs = {"replay": args.replay} if args.command == "augment-preview" else {}
        run_command(args.command, cfg, **kwargs)
        manager.save(cfg.paths.output(os.path.join(RUN_META_DIR, f"{args.command}.config.json")))
        return EXIT_OK
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("Data error: %s", e)
        return EXIT_DATA
    except Exception:
        logger.exception("Internal error while running '%s'", args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
