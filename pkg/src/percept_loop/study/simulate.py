"""Simulated subjects for desk-scale studies.

Each simulated subject prefers the image with the smaller structural
distance to the reference, with choice noise controlled by a logistic
temperature: P(prefer a over b) = logistic((d_b - d_a) / temperature)
where d_x = 1 - SSIM(x, reference). At temperature -> 0 the best image
always wins; large temperatures approach coin flips.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from .. import dataio
from ..metrics import ssim
from ..validation import check_seed
from .records import VoteRecord

_TIMESTAMP_BASE_MS = 1_700_000_000_000


def structural_distances(manifest, root) -> dict[tuple[str, str], float]:
    """1 - SSIM(entry, reference) for every pseudo-enhanced entry."""
    root = Path(root)
    distances = {}
    for cid in manifest.content_ids():
        ref = dataio.load_image(root / manifest.entry(cid, "reference").path)
        for e in manifest.entries:
            if e.content_id == cid and e.role == "enhanced":
                img = dataio.load_image(root / e.path)
                distances[(cid, e.method_id)] = 1.0 - ssim(img, ref)
    return distances


def preference_probability(d_a: float, d_b: float, temperature: float) -> float:
    """Probability that the method with distance d_a is preferred."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = (d_b - d_a) / temperature
    # Numerically stable logistic.
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return float(e / (1.0 + e))


def simulate_votes(manifest, root, n_subjects: int, temperature: float = 0.05,
                   seed=0, study_id: str | None = None) -> list[VoteRecord]:
    """Draw a complete study: every subject votes every pair per content.

    Deterministic given seed; iteration runs over sorted contents,
    sorted method pairs, then subjects, consuming one generator.
    """
    seed = check_seed(seed)
    if n_subjects < 1:
        raise ValueError("n_subjects must be positive")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    manifest.validate()
    methods = sorted(manifest.method_ids())
    if len(methods) < 2:
        raise ValueError("need at least two pseudo-enhanced methods")

    distances = structural_distances(manifest, root)
    rng = np.random.default_rng(seed)
    study = study_id or f"sim-{seed}"
    votes = []
    clock = 0
    for cid in sorted(manifest.content_ids()):
        for a, b in itertools.combinations(methods, 2):
            if (cid, a) not in distances or (cid, b) not in distances:
                raise ValueError(f"content {cid!r} lacks entries for {a}/{b}")
            p_a = preference_probability(distances[(cid, a)],
                                         distances[(cid, b)], temperature)
            for s in range(n_subjects):
                choice = "A" if rng.random() < p_a else "B"
                side = "A" if rng.random() < 0.5 else "B"
                elapsed = int(rng.integers(800, 5000))
                clock += elapsed
                votes.append(VoteRecord(
                    study_id=study,
                    subject_id=f"s{s:03d}",
                    content_id=cid,
                    method_a=a,
                    method_b=b,
                    choice=choice,
                    presented_left=side,
                    elapsed_ms=elapsed,
                    is_sanity=False,
                    timestamp_ms=_TIMESTAMP_BASE_MS + clock,
                ))
    return votes
