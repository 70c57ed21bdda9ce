"""Trial scheduling and session sanity checking.

A subject's schedule covers every unordered method pair exactly once per
assigned content, in seeded-random order with seeded-random left/right
placement. Sanity trials are repeats of earlier trials with the sides
swapped; a session passes when the repeated answers agree often enough
with the originals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..validation import check_seed


@dataclass(frozen=True)
class Trial:
    content_id: str
    method_a: str
    method_b: str
    presented_left: str
    is_sanity: bool

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.method_a, self.method_b)))


@dataclass
class TrialSchedule:
    trials: list[Trial]
    subject_id: str
    seed: int

    def non_sanity(self) -> list[Trial]:
        return [t for t in self.trials if not t.is_sanity]


@dataclass(frozen=True)
class SanityResult:
    passed: bool
    consistency: float
    n_sanity: int


def schedule_trials(content_ids, methods, subject_id: str,
                    sanity_rate: float = 0.1, seed=0) -> TrialSchedule:
    """Build one subject's randomized trial order.

    Emits len(content_ids) * M*(M-1)/2 base trials, plus
    round(sanity_rate * base) sanity repeats, each inserted strictly
    after the trial it duplicates and with left/right swapped.
    """
    seed = check_seed(seed)
    methods = list(methods)
    content_ids = list(content_ids)
    if len(methods) < 2:
        raise ValueError(f"need at least 2 methods, got {len(methods)}")
    if len(set(methods)) != len(methods):
        raise ValueError("method ids must be unique")
    if not content_ids:
        raise ValueError("content id list is empty")
    if not 0.0 <= sanity_rate <= 0.2:
        raise ValueError(f"sanity_rate must be in [0, 0.2], got {sanity_rate}")

    rng = np.random.default_rng(seed)
    combos = [(cid, a, b)
              for cid in content_ids
              for a, b in itertools.combinations(methods, 2)]
    order = rng.permutation(len(combos))
    trials = []
    for idx in order:
        cid, a, b = combos[idx]
        side = "A" if rng.random() < 0.5 else "B"
        trials.append(Trial(cid, a, b, side, is_sanity=False))

    n_sanity = int(round(sanity_rate * len(trials)))
    if n_sanity > 0:
        sources = rng.choice(len(trials), size=n_sanity, replace=False)
        # Descending order keeps the not-yet-processed source indices
        # valid while the list grows.
        for src_idx in sorted((int(i) for i in sources), reverse=True):
            src = trials[src_idx]
            swapped = "B" if src.presented_left == "A" else "A"
            repeat = Trial(src.content_id, src.method_a, src.method_b,
                           swapped, is_sanity=True)
            pos = int(rng.integers(src_idx + 1, len(trials) + 1))
            trials.insert(pos, repeat)

    return TrialSchedule(trials=trials, subject_id=subject_id, seed=seed)


def sanity_check(votes, min_consistency: float = 0.8) -> SanityResult:
    """Repeated-pair consistency for one subject session.

    For every sanity vote, the answer counts as consistent when the
    chosen *method* matches the original (non-sanity) vote on the same
    content and pair; the recorded choice already abstracts away which
    side the method was shown on.
    """
    if not 0.0 <= min_consistency <= 1.0:
        raise ValueError("min_consistency must lie in [0, 1]")
    originals = {}
    for v in votes:
        if not v.is_sanity:
            originals[(v.content_id, v.pair)] = v
    sanity_votes = [v for v in votes if v.is_sanity]
    if not sanity_votes:
        raise ValueError("session contains no sanity trials")
    agree = 0
    for v in sanity_votes:
        original = originals.get((v.content_id, v.pair))
        if original is None:
            raise ValueError(
                f"sanity vote without original trial: {v.content_id} {v.pair}")
        agree += v.chosen_method == original.chosen_method
    consistency = agree / len(sanity_votes)
    return SanityResult(passed=consistency >= min_consistency,
                        consistency=consistency,
                        n_sanity=len(sanity_votes))
