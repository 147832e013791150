import logging
import os
import sys
import tempfile
from typing import List, Sequence, Tuple

from utils.errors import OutputError

logger = logging.getLogger(__name__)


def _stage(path: str, text: str) -> str:
    """Write ``text`` to a temp file next to ``path`` and return the temp path"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.flatnorm-', suffix='.tmp', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
    except OSError:
        os.unlink(tmp_path)
        raise
    return tmp_path


def atomic_write(path: str, text: str):
    """Write text atomically: temp file in the target directory, then rename.

    ``path == '-'`` writes to stdout instead. Text is always UTF-8 with LF
    line endings.
    """
    atomic_write_all([(path, text)])


def atomic_write_all(outputs: Sequence[Tuple[str, str]]):
    """Write several outputs so that either all of them appear or none does.

    Every file is staged before the first rename; stdout targets are written
    last, once all files are in place.
    """
    staged: List[Tuple[str, str]] = []
    stdout_texts = []
    current = None
    try:
        for path, text in outputs:
            if path == '-':
                stdout_texts.append(text)
                continue
            current = path
            staged.append((_stage(path, text), path))
        for index, (tmp_path, path) in enumerate(staged):
            current = path
            os.replace(tmp_path, path)
            staged[index] = (None, path)
            logger.debug(f"Wrote {path}")
    except OSError as e:
        for tmp_path, path in staged:
            if tmp_path is None:
                # renamed before the failure
                _discard(path)
            elif os.path.exists(tmp_path):
                _discard(tmp_path)
        raise OutputError(str(e), current) from e

    for text in stdout_texts:
        sys.stdout.write(text)
    if stdout_texts:
        sys.stdout.flush()


def _discard(path: str):
    try:
        os.unlink(path)
    except OSError as e:
        logger.warning(f"Could not remove {path}: {e}")
