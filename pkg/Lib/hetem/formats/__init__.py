"""
File codecs. Every writer goes through :func:`atomicWrite` so a crash
never leaves a truncated file under the final name.
"""

import json
import os
import tempfile
from contextlib import contextmanager


@contextmanager
def atomicWrite(path):
    """
    Yield a temporary path next to *path*; on success the file is
    renamed over *path*, on failure it is removed.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    base, ext = os.path.splitext(os.path.basename(path))
    fd, tempPath = tempfile.mkstemp(prefix="." + base + ".", suffix=ext + ".tmp", dir=directory)
    os.close(fd)
    try:
        yield tempPath
        os.replace(tempPath, path)
    finally:
        if os.path.exists(tempPath):
            os.remove(tempPath)


def writeText(path, text):
    with atomicWrite(path) as tempPath:
        with open(tempPath, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def writeJson(path, data):
    """
    Write *data* as indented JSON. Non-finite floats are written as
    ``Infinity``/``NaN``.
    """
    writeText(path, json.dumps(data, indent=2, sort_keys=False) + "\n")


def readJson(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
