"""Shared plumbing: seeded RNG streams, stratified splits, stable file I/O.

Every random draw in the pipeline comes from a stream derived from a root
seed plus an integer task key, so results never depend on execution order
or worker scheduling.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError


def rng_stream(root_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for task ``key`` under ``root_seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), *[int(k) for k in key]]))


def stratified_split_indices(
    labels: np.ndarray, train_ratio: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified train/test index split.

    Per class, round(m_c * (1 - train_ratio)) samples go to test, clamped so
    both splits keep at least one sample of each class. Classes with fewer
    than 2 samples are rejected.
    """
    labels = np.asarray(labels)
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must be in (0,1), got {train_ratio}")
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls!r} has {idx.size} sample(s); need at least 2")
        rng = rng_stream(seed, int(cls))
        idx = rng.permutation(idx)
        n_test = int(round(idx.size * (1.0 - train_ratio)))
        n_test = min(max(n_test, 1), idx.size - 1)
        test_parts.append(idx[:n_test])
        train_parts.append(idx[n_test:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def stratified_kfold_indices(labels: np.ndarray, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified fold assignment; returns held-out indices per fold."""
    labels = np.asarray(labels)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng = rng_stream(seed, 1000 + int(cls))
        idx = rng.permutation(idx)
        for pos, sample in enumerate(idx):
            folds[pos % n_folds].append(int(sample))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def fmt(value) -> str:
    """Render a cell for delimited output; floats use shortest round-trip repr."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_delimited(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text())


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()
