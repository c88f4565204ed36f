import logging
import os
from pathlib import Path

from .errors import IoError

logger = logging.getLogger(__name__)

LOCK_NAME = '.cadenza.lock'


class OutputLock:
    """Advisory lock on an output directory, held for the life of one command."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / LOCK_NAME

    def acquire(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            try:
                holder = self.path.read_text(encoding='ascii').strip() or 'unknown'
            except OSError:
                holder = 'unknown'
            raise IoError(f'{self.path.parent} is in use by pid {holder} (remove {self.path} if stale)') from None
        except OSError as e:
            raise IoError(f'cannot create lock {self.path}: {e}') from e
        with os.fdopen(fd, 'w', encoding='ascii') as f:
            f.write(str(os.getpid()))
        logger.debug(f'Acquired {self.path}')
        return self

    def release(self):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()
        return False
