# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import argparse
import importlib
import sys
import time

from retas import __version__, logger
from retas.helpers import ConfigError, RetasError, exit_code_for, format_exception, utils
from retas.plugins import all_modules


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None, help="worker processes (0 = auto)")
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> Parser:
    parser = Parser(prog="retas", description="Renewal ETAS fitting, declustering and simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    for module in sorted(all_modules):
        plugin = importlib.import_module(f"retas.plugins.{module}")
        sub = plugin.register(subparsers)
        _add_common(sub)
        sub.set_defaults(handler=plugin.run)
    return parser


def main(argv=None) -> int:
    started = time.time()
    try:
        args = build_parser().parse_args(argv)
        args.handler(args)
    except KeyboardInterrupt:
        logger.warning("Interrupted.")
        return 130
    except RetasError as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        logger.debug(format_exception(ex))
        return exit_code_for(ex)
    except Exception as ex:
        logger.error(format_exception(ex))
        return exit_code_for(ex)
    logger.info(f"Done in {utils.format_duration(time.time() - started)}.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
