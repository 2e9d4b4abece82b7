"""Small shared helpers: seeds, thread caps, directory digests."""

import hashlib
import os
from pathlib import Path

_ROLE_OFFSETS = {"low": 1, "mid": 2, "high": 3, "meta": 4, "metasplit": 5}


def derive_seed(base, role, index):
    """Stable per-role, per-index seed derived from the engine seed."""
    return int(base) * 1000 + _ROLE_OFFSETS[role] * 100 + int(index)


def engine_threads():
    """Worker cap for internal parallelism; ENTRI_THREADS overrides."""
    env = os.environ.get("ENTRI_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return min(4, os.cpu_count() or 1)


def directory_digest(path):
    """SHA-256 over sorted relative paths and file contents."""
    digest = hashlib.sha256()
    root = Path(path)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            digest.update(str(p.relative_to(root)).encode())
            digest.update(p.read_bytes())
    return digest.hexdigest()
