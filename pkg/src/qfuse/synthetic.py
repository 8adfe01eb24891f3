"""Seeded synthetic traffic-like datasets for desk-scale pipeline runs.

Two overlapping Gaussian clusters in numeric feature space plus one
categorical column weakly correlated with the class, written as a
headered CSV so the full ingestion path gets exercised.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .util import rng_stream


def make_two_cluster_csv(
    path: str | Path,
    n_samples: int = 500,
    n_numeric: int = 8,
    attack_fraction: float = 0.4,
    separation: float = 2.6,
    seed: int = 0,
) -> Path:
    """Write a binary-labeled CSV: gaussian clusters + a categorical column."""
    rng = rng_stream(seed, 9000)
    n_attack = int(round(n_samples * attack_fraction))
    labels = np.array([1] * n_attack + [0] * (n_samples - n_attack))
    labels = rng.permutation(labels)

    direction = rng.normal(size=n_numeric)
    direction /= np.linalg.norm(direction)
    X = rng.normal(size=(n_samples, n_numeric))
    X += np.where(labels[:, None] == 1, 0.5 * separation, -0.5 * separation) * direction

    protocols = np.array(["tcp", "udp", "icmp"])
    # attack traffic skews toward udp/icmp, benign toward tcp
    probs_attack, probs_benign = (0.2, 0.5, 0.3), (0.6, 0.3, 0.1)
    cat = np.where(
        labels == 1,
        rng.choice(protocols, size=n_samples, p=probs_attack),
        rng.choice(protocols, size=n_samples, p=probs_benign),
    )

    path = Path(path)
    header = [f"x{i}" for i in range(n_numeric)] + ["proto", "label"]
    lines = [",".join(header)]
    for row, proto, label in zip(X, cat, labels):
        lines.append(",".join([repr(float(v)) for v in row] + [proto, str(int(label))]))
    path.write_text("\n".join(lines) + "\n")
    return path
