# app.py
"""Command-line entry point: `python app.py <command> [options]`.

Prints a JSON summary on stdout. Exit codes: 0 success, 1 usage error,
2 data or format error, 3 numerical failure.
"""
import argparse
import json
import logging
import sys

import numpy as np

from commands import evaluate, extract, predict, synth_docs, train_gmm, train_mlp, train_ncm, train_pca, train_svm
from config import load_settings
from errors import DocRepError, UsageError

logger = logging.getLogger(__name__)

COMMANDS = [extract, train_pca, train_gmm, train_mlp, train_svm, train_ncm, evaluate, predict, synth_docs]
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="Key-value settings file")
    common.add_argument("--seed", type=int, help="Overrides the 'seed' setting")
    common.add_argument("--log-level", choices=LOG_LEVELS, help="Overrides the 'log_level' setting")

    parser = ArgumentParser(prog="docrep", description="Document image representations and transfer evaluation")
    subparsers = parser.add_subparsers(dest="command", metavar="command", parser_class=ArgumentParser)
    subparsers.required = True
    for module in COMMANDS:
        sub = subparsers.add_parser(module.NAME, help=module.HELP, description=module.HELP, parents=[common])
        module.add_arguments(sub)
        sub.set_defaults(handler=module)
    return parser


def _overrides(args):
    overrides = {"seed": args.seed, "log_level": args.log_level}
    for dest, key in args.handler.OVERRIDES.items():
        overrides[key] = getattr(args, dest, None)
    return overrides


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def configure_logging(level):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv=None):
    configure_logging("WARNING")
    try:
        args = build_parser().parse_args(argv)
        settings = load_settings(args.config, _overrides(args))
        configure_logging(settings["log_level"])
        summary = args.handler.run(args, settings)
    except DocRepError as e:
        logger.error("%s", e)
        return e.exit_code
    print(json.dumps({"command": args.command, **summary}, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
