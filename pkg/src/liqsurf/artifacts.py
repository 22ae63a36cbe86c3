"""Atomic output files and run manifests."""

import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import joblib
import matplotlib
import numba
import numpy as np
import scipy
import sklearn
import statsmodels

from . import __version__


class AtomicOutputs:
    """Collect temporary files and rename them into place only on success.

    Use as a context manager; on an exception every temporary file is
    removed, and so is any output directory the set created.
    """

    def __init__(self):
        self._pending = []
        self._made_dirs = []

    def directory(self, path):
        path = Path(path)
        if not path.exists():
            missing = []
            p = path
            while not p.exists():
                missing.append(p)
                p = p.parent
            path.mkdir(parents=True)
            self._made_dirs.extend(missing)
        elif not path.is_dir():
            raise NotADirectoryError(f"{path} exists and is not a directory")
        return path

    def path(self, final):
        final = Path(final)
        self.directory(final.parent if str(final.parent) else Path("."))
        tmp = final.with_name(f".{final.name}.tmp-{os.getpid()}")
        self._pending.append((tmp, final))
        return tmp

    @property
    def finals(self):
        return [f for _, f in self._pending]

    def commit(self):
        for tmp, final in self._pending:
            os.replace(tmp, final)
        self._pending = []

    def abort(self):
        for tmp, _ in self._pending:
            try:
                tmp.unlink()
            except FileNotFoundError:
                pass
        self._pending = []
        for d in self._made_dirs:  # deepest first
            try:
                d.rmdir()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    return {
        "liqsurf": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "statsmodels": statsmodels.__version__,
        "numba": numba.__version__,
        "joblib": joblib.__version__,
        "matplotlib": matplotlib.__version__,
    }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, Path):
        return str(v)
    return v


def build_manifest(command, inputs, outputs, config, seed=None):
    """Run record. No timestamps, so identical runs give identical manifests."""
    return {
        "command": command,
        "inputs": [{"path": str(p), "sha256": sha256(p)} for p in inputs],
        "outputs": [str(p) for p in outputs],
        "config": _jsonable(config),
        "seed": seed,
        "versions": versions(),
        "platform": sys.platform,
    }


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
