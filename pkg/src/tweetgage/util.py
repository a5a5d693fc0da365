"""Small shared helpers: named sub-seeds and artifact hashing."""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path


def derive_seed(master: int, name: str) -> int:
    """Stable sub-seed for a named stage, derived from the master seed.

    Keyed blake2b keeps stages statistically independent while staying
    reproducible across platforms and runs.
    """
    h = hashlib.blake2b(name.encode("utf-8"), digest_size=8,
                        key=struct.pack("<q", master))
    return int.from_bytes(h.digest(), "little") % (2**63)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
