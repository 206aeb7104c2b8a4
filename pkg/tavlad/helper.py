import logging
import sys


def find_version():
    try:
        from importlib.metadata import version, PackageNotFoundError
    except ImportError:
        return 'unknown'
    try:
        return version('tavlad')
    except PackageNotFoundError:
        return 'dev'


def setup_logging(config):
    """Route the root logger to stderr with the config's level and format"""
    logging.basicConfig(
        level=config.logger_level,
        format=config.logger_format,
        datefmt=config.logger_datefmt,
        stream=sys.stderr,
        force=True,
    )
