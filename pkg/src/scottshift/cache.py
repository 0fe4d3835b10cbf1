"""On-disk cache of solved channel pairs.

Each entry holds the Schroedinger and Chandrasekhar spectra of one channel
plus the per-state drops, keyed by a content hash of every input that
enters the matrices.  Floats are written with ``repr`` through json, which
round-trips exactly, so a hit reproduces the computed arrays bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import warnings
from dataclasses import asdict

import numpy as np

from .shift import ALGORITHM_VERSION, ChannelPair, ShiftOptions, solve_channel_pair

ENV_VAR = "SCOTTSHIFT_CACHE"


def resolve_cache_dir(cache_dir=None):
    """The environment variable wins over the flag; neither means no cache."""
    return os.environ.get(ENV_VAR) or cache_dir or None


def pair_key(l, kappa, grid, screening=None, options=ShiftOptions()):
    payload = {
        "kind": "channel-pair",
        "version": ALGORITHM_VERSION,
        "l": int(l),
        "kappa": float(kappa).hex(),
        "grid": grid.digest(),
        "screening": screening.digest() if screening is not None else None,
        "options": asdict(options),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _encode(key, pair):
    return {
        "key": key,
        "l": pair.l,
        "kappa": pair.kappa,
        "screened": pair.screened,
        "schroedinger": pair.schroedinger.tolist(),
        "chandrasekhar": pair.chandrasekhar.tolist(),
        "state_shifts": pair.state_shifts.tolist(),
    }


def _decode(key, data):
    if data.get("key") != key:
        raise ValueError("key mismatch")
    arrays = [np.array(data[name], dtype=float) for name in ("schroedinger", "chandrasekhar", "state_shifts")]
    if arrays[0].shape != arrays[1].shape or arrays[2].size > arrays[0].size:
        raise ValueError("inconsistent array lengths")
    return ChannelPair(int(data["l"]), float(data["kappa"]), *arrays, bool(data["screened"]))


class PairCache:
    """A ``solver`` for the shift module that consults a directory first."""

    def __init__(self, directory):
        self.directory = os.fspath(directory)
        self.hits = 0
        self.misses = 0

    def path(self, key):
        return os.path.join(self.directory, key + ".json")

    def load(self, key):
        path = self.path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                return _decode(key, json.load(fh))
        except FileNotFoundError:
            return None
        except (OSError, ValueError, KeyError, TypeError) as exc:
            warnings.warn(f"ignoring corrupt cache entry {path}: {exc}", RuntimeWarning, stacklevel=2)
            return None

    def store(self, key, pair):
        os.makedirs(self.directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(_encode(key, pair), fh)
            os.replace(tmp, self.path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __call__(self, l, kappa, grid, screening=None, options=ShiftOptions()):
        key = pair_key(l, kappa, grid, screening, options)
        pair = self.load(key)
        if pair is not None:
            self.hits += 1
            return pair
        self.misses += 1
        pair = solve_channel_pair(l, kappa, grid, screening, options)
        self.store(key, pair)
        return pair
