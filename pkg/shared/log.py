import logging
import sys

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def configure_logging(level='INFO', log_file=None):
    """Install the stream (and optional file) handlers used by every command."""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
