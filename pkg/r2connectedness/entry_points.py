import logging
import sys

from r2connectedness import logger
from r2connectedness import verbosity_mapping
from r2connectedness.cli import build_parser, execute, verbosity_of


def setup_logging(level):
    """Configure root logger for the application"""
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Configure format for all handlers
    formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(name)s.%(funcName)s: %(message)s')

    # Console handler on stderr, so nothing mixes with data written to stdout
    if not any(getattr(handler, "_r2c_console", False) for handler in root_logger.handlers):
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler._r2c_console = True
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(verbosity_mapping[verbosity_of(args)])
    logger.debug(("Logging Level is {}".format(
        logger.getEffectiveLevel())))
    sys.exit(execute(args))


if __name__ == "__main__":
    main()
