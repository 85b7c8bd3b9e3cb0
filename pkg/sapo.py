import argparse
import logging
import sys

from commands import load_commands
from commands._utils import EXIT_INVALID, load_config_file
from placement._utils import ConfigurationError

logger = logging.getLogger("sapo")


def setup_logging(debug: bool):
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
    # repeated main() calls in one process must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter(
            "%(asctime)s - [%(levelname)s] - %(filename)s:%(lineno)d - %(message)s"
        )
    )
    logger.addHandler(handler)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="sapo",
        description="Sequential actuator placement: instances, oracles, training and evaluation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    return parser, load_commands(subparsers)


def parse_options(argv: list[str] | None) -> argparse.Namespace:
    parser, commands = build_parser()
    options = parser.parse_args(argv)
    if options.config is None:
        return options

    # config values become defaults, so explicit flags still win
    values = load_config_file(options.config)
    unknown = sorted(k for k in values if not hasattr(options, k) or k in ("func", "command"))
    if unknown:
        raise ConfigurationError(f"{options.config}: unknown options {unknown}")
    commands[options.command].set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    try:
        options = parse_options(argv)
    except (ConfigurationError, FileNotFoundError) as e:
        setup_logging(False)
        logger.error(str(e))
        return EXIT_INVALID
    setup_logging(options.debug)
    return options.func(options)


if __name__ == "__main__":
    sys.exit(main())
