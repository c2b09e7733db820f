"""Disk cache for ball enumerations and truncated operators.

Location: the ``MARTINBENCH_CACHE`` environment variable or an explicit
directory; no caching when unset.

Binary layout (one ``<key>.npz`` per entry, numpy zip archive):

* balls (key ``ball-<model>-<radius>``):
    - ``words``   int32 array, all normal-form words concatenated
    - ``offsets`` int64 array, word i occupies words[offsets[i]:offsets[i+1]]
    - ``dist``    int64 word lengths
    - ``nbr``     int64 (n, num_generators) neighbour indices, -1 = outside
* operators (key ``op-<system>-<m>-<radius>-<omega>``):
    - ``data``, ``indices``, ``indptr``: the CSR arrays of the action matrix
    - ``interior`` bool per atom
    - ``shape``    int64 pair

Keys embed content hashes of the defining data, so stale entries cannot be
read back against a different system.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
import scipy.sparse as sp

from .groups import Ball


def cache_dir() -> str | None:
    return os.environ.get("MARTINBENCH_CACHE")


def _model_key(model) -> str:
    return hashlib.sha256(repr(model).encode()).hexdigest()[:12]


def _path(directory: str, key: str) -> str:
    return os.path.join(directory, key + ".npz")


def save_ball(ball: Ball, directory: str | None = None):
    directory = directory or cache_dir()
    if directory is None:
        return
    os.makedirs(directory, exist_ok=True)
    key = f"ball-{_model_key(ball.model)}-{ball.radius}"
    offsets = np.zeros(len(ball.words) + 1, dtype=np.int64)
    for i, w in enumerate(ball.words):
        offsets[i + 1] = offsets[i] + len(w)
    flat = np.fromiter((s for w in ball.words for s in w), dtype=np.int32,
                       count=int(offsets[-1]))
    np.savez_compressed(_path(directory, key), words=flat, offsets=offsets,
                        dist=ball.dist.astype(np.int64), nbr=ball.nbr)


def load_ball(model, radius: int, directory: str | None = None) -> Ball | None:
    directory = directory or cache_dir()
    if directory is None:
        return None
    key = f"ball-{_model_key(model)}-{radius}"
    path = _path(directory, key)
    if not os.path.exists(path):
        return None
    z = np.load(path)
    offsets = z["offsets"]
    flat = z["words"]
    words = [tuple(int(s) for s in flat[offsets[i]:offsets[i + 1]])
             for i in range(len(offsets) - 1)]
    index = {w: i for i, w in enumerate(words)}
    return Ball(model, radius, words, z["dist"], z["nbr"], index)


def get_ball(model, radius: int, directory: str | None = None) -> Ball:
    """Cached ball enumeration (computes and stores on miss)."""
    ball = load_ball(model, radius, directory)
    if ball is not None:
        return ball
    ball = Ball.enumerate(model, radius)
    save_ball(ball, directory)
    return ball


def operator_key(system, m: int, radius: int, omega=None) -> str:
    om = "full" if omega is None else hashlib.sha256(
        np.asarray(omega).tobytes()).hexdigest()[:10]
    return f"op-{system.config_key()}-{m}-{radius}-{om}"


def save_operator_matrix(key: str, matrix: sp.csr_matrix, interior: np.ndarray,
                         directory: str | None = None):
    directory = directory or cache_dir()
    if directory is None:
        return
    os.makedirs(directory, exist_ok=True)
    np.savez_compressed(_path(directory, key), data=matrix.data,
                        indices=matrix.indices, indptr=matrix.indptr,
                        interior=interior,
                        shape=np.asarray(matrix.shape, dtype=np.int64))


def load_operator_matrix(key: str, directory: str | None = None):
    directory = directory or cache_dir()
    if directory is None:
        return None
    path = _path(directory, key)
    if not os.path.exists(path):
        return None
    z = np.load(path)
    mat = sp.csr_matrix((z["data"], z["indices"], z["indptr"]),
                        shape=tuple(z["shape"]))
    return mat, z["interior"]
