"""
``wakesleep`` command-line entry point.

Exit codes:
    0  success
    1  unexpected error
    2  usage or configuration error
    3  numeric fault (NaN/inf); the last good checkpoint is printed
    4  data, download or checkpoint error
"""

import argparse
import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from wakesleep.base.exceptions import (
    CheckpointError,
    ConfigurationError,
    ContractViolation,
    DataFormatError,
    DownloadError,
    NumericFault,
)
from wakesleep.base.schemas import RunManifest, TrainConfig
from wakesleep.base.storage import atomic_write_bytes, config_digest

from . import commands

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_DATA = 4

MANIFEST_FILE = "manifest.json"


def parse_override(item: str) -> tuple:
    """``key.path=value``; the value is parsed as JSON and falls back to a plain string."""
    if "=" not in item:
        raise ConfigurationError(f"Override '{item}' is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"Override '{item}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for item in overrides:
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Cannot set '{item}': '{part}' is not a section")
            node = child
        node[path[-1]] = value
    return data


def load_config(path: Optional[str], overrides: Sequence[str] = (), seed: Optional[int] = None) -> TrainConfig:
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except FileNotFoundError:
            raise ConfigurationError(f"Config file {path} not found")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must hold a JSON object")
    apply_overrides(data, overrides)
    if seed is not None:
        data["seed"] = seed
    try:
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid config: {e}", details={"errors": e.errors(include_url=False)})


def _versions() -> Dict[str, str]:
    import numpy
    import pydantic
    import scipy

    from wakesleep import __version__

    return {
        "wakesleep": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def write_manifest(out_dir: Path, command: str, config: TrainConfig, argv: List[str]) -> Path:
    manifest = RunManifest(
        command=command,
        config_hash=config_digest(config),
        seed=config.seed,
        versions=_versions(),
        argv=list(argv),
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    path = out_dir / MANIFEST_FILE
    previous = read_manifest(path)
    if previous is not None and not previous.same_run_as(manifest):
        logger.info(f"Replacing manifest of an earlier '{previous.command}' run in {out_dir}")
    atomic_write_bytes(path, manifest.model_dump_json(indent=2).encode("utf-8"))
    return path


def read_manifest(path: Path) -> Optional[RunManifest]:
    """The manifest at ``path``, or None when it is missing or unreadable."""
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValidationError):
        return None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field by dotted path (repeatable)")
    common.add_argument("--out", default="runs/default", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--log-level", default=os.getenv("WAKESLEEP_LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="wakesleep", description="Semi-supervised wake-sleep training")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[common], help="generate or load datasets and save them")

    train = sub.add_parser("train", parents=[common], help="train a model")
    train.add_argument("--resume", help="checkpoint to resume from")
    train.add_argument("--allow-config-mismatch", action="store_true")

    evaluate = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the validation set")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--allow-config-mismatch", action="store_true")

    diagnose = sub.add_parser("diagnose", parents=[common], help="estimator bias/variance on an enumerable toy")
    diagnose.add_argument("--ks", type=int, nargs="+", default=list(commands.diagnostics.DEFAULT_KS))
    diagnose.add_argument("--n-sets", type=int, default=1000)
    diagnose.add_argument("--n-batches", type=int, default=100)
    diagnose.add_argument("--labeled-steps", type=int, nargs="*", default=[],
                          help="steps of the diagnosed sequence whose label is observed")

    plots = sub.add_parser("emit-plots", parents=[common], help="long-format CSV from metrics files")
    plots.add_argument("metrics", nargs="+")
    plots.add_argument("--names", nargs="+", help="run label per metrics file")

    sample = sub.add_parser("sample", parents=[common], help="continue a validation sequence from a checkpoint")
    sample.add_argument("--checkpoint", required=True)
    sample.add_argument("--steps", type=int, default=200)
    sample.add_argument("--prefix-length", type=int, default=10)
    sample.add_argument("--index", type=int, default=0)
    sample.add_argument("--allow-config-mismatch", action="store_true")
    return parser


def run(args: argparse.Namespace, argv: List[str]) -> Dict[str, Any]:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = load_config(args.config, args.overrides, args.seed)
    write_manifest(out_dir, args.command, config, argv)

    if args.command == "gen-data":
        return commands.gen_data(config, out_dir)
    if args.command == "train":
        return commands.train(config, out_dir, args.resume, args.allow_config_mismatch)
    if args.command == "eval":
        return commands.eval_checkpoint(config, args.checkpoint, out_dir, args.allow_config_mismatch)
    if args.command == "diagnose":
        return commands.diagnose(
            config, out_dir, ks=args.ks, n_sets=args.n_sets, n_batches=args.n_batches,
            labeled_steps=args.labeled_steps,
        )
    if args.command == "emit-plots":
        return commands.emit_plots(args.metrics, out_dir, args.names)
    if args.command == "sample":
        return commands.sample(
            config,
            args.checkpoint,
            out_dir,
            n_steps=args.steps,
            prefix_length=args.prefix_length,
            index=args.index,
            allow_config_mismatch=args.allow_config_mismatch,
        )
    raise ConfigurationError(f"Unknown command '{args.command}'")


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        summary = run(args, argv)
    except (ConfigurationError, ContractViolation) as e:
        logger.error(f"{e.code}: {e.message}")
        return EXIT_USAGE
    except NumericFault as e:
        logger.error(f"{e.code}: {e.message}", exc_info=True)
        print(json.dumps({"error": e.code, "message": e.message, "checkpoint_path": e.checkpoint_path}))
        return EXIT_NUMERIC
    except (DataFormatError, CheckpointError, DownloadError) as e:
        logger.error(f"{e.code}: {e.message}")
        return EXIT_DATA
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_UNEXPECTED

    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
