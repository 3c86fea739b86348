"""
File helpers. Every write goes to a temporary file in the destination directory and is renamed into place.
"""
import json
import os
import tempfile


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def dump_json(payload):
    return json.dumps(payload, indent=2) + "\n"


def write_json(path, payload):
    atomic_write_text(path, dump_json(payload))


def read_json(path):
    with open(path) as handle:
        return json.load(handle)
