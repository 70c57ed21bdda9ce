"""Tallying votes into winning-count matrices and opinion scores.

For one content with M methods and N subjects, a complete study yields
N*(M-1) comparisons per method; the opinion score is the fraction of
those comparisons the method won.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import VoteRecord
from .scheduling import sanity_check


class IncompleteTallyError(ValueError):
    """Tally is missing votes for at least one method pair."""


@dataclass
class PairwiseTally:
    """Per-content M x M winning-count matrix.

    counts[r][c] is the number of times methods[r] was preferred over
    methods[c]; the diagonal is zero.
    """

    content_id: str
    methods: list[str]
    counts: np.ndarray
    n_subjects: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        m = len(self.methods)
        if self.counts.shape != (m, m):
            raise ValueError(
                f"counts must be {m}x{m}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")
        if np.diagonal(self.counts).any():
            raise ValueError("tally diagonal must be zero")
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be positive")

    def is_complete(self) -> bool:
        m = len(self.methods)
        pair_sums = self.counts + self.counts.T
        expected = np.full((m, m), self.n_subjects, dtype=np.int64)
        np.fill_diagonal(expected, 0)
        return bool((pair_sums == expected).all())

    def winning_times(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass(frozen=True)
class OpinionScore:
    content_id: str
    method_id: str
    winning_times: int
    total: int
    score: float


def filter_valid_votes(votes, min_consistency: float = 0.8):
    """Drop failed sessions and sanity trials before tallying.

    Votes are grouped into (study_id, subject_id) sessions. Sessions
    containing sanity trials must pass the consistency check; failing
    sessions are excluded entirely. Returns non-sanity votes of the
    surviving sessions.
    """
    sessions: dict[tuple[str, str], list[VoteRecord]] = {}
    for v in votes:
        sessions.setdefault((v.study_id, v.subject_id), []).append(v)
    kept = []
    for session_votes in sessions.values():
        if any(v.is_sanity for v in session_votes):
            result = sanity_check(session_votes, min_consistency)
            if not result.passed:
                continue
        kept.extend(v for v in session_votes if not v.is_sanity)
    return kept


def tally(votes, methods, content_id: str) -> PairwiseTally:
    """Count pairwise wins for one content.

    Expects pre-filtered votes (non-sanity, passing sessions); sanity
    votes slipping through raise, as do votes naming unknown methods.
    """
    methods = list(methods)
    index = {m: i for i, m in enumerate(methods)}
    counts = np.zeros((len(methods), len(methods)), dtype=np.int64)
    subjects = set()
    n_used = 0
    for v in votes:
        if v.content_id != content_id:
            continue
        if v.is_sanity:
            raise ValueError(
                "tally received a sanity vote; run filter_valid_votes first")
        if v.method_a not in index or v.method_b not in index:
            unknown = {v.method_a, v.method_b} - set(index)
            raise ValueError(f"vote references unknown method(s): {unknown}")
        winner = v.chosen_method
        loser = v.method_b if winner == v.method_a else v.method_a
        counts[index[winner], index[loser]] += 1
        subjects.add(v.subject_id)
        n_used += 1
    if n_used == 0:
        return PairwiseTally(content_id, methods, counts, n_subjects=1)
    return PairwiseTally(content_id, methods, counts,
                         n_subjects=len(subjects))


def opinion_scores(t: PairwiseTally) -> list[OpinionScore]:
    """Winning-time fractions for a complete tally.

    score = row_sum / (n_subjects * (M - 1)); raises on incomplete
    tallies where some pair's two counts do not add up to n_subjects.
    """
    if not t.is_complete():
        pair_sums = t.counts + t.counts.T
        bad = [(t.methods[r], t.methods[c], int(pair_sums[r, c]))
               for r in range(len(t.methods))
               for c in range(r + 1, len(t.methods))
               if pair_sums[r, c] != t.n_subjects]
        raise IncompleteTallyError(
            f"content {t.content_id!r}: expected {t.n_subjects} votes per "
            f"pair, mismatches: {bad[:5]}")
    total = t.n_subjects * (len(t.methods) - 1)
    wins = t.winning_times()
    return [
        OpinionScore(content_id=t.content_id, method_id=m,
                     winning_times=int(wins[i]), total=total,
                     score=int(wins[i]) / total)
        for i, m in enumerate(t.methods)
    ]


def aggregate_votes(votes, methods=None, min_consistency: float = 0.8):
    """Full pipeline: session filtering, per-content tallies, scores."""
    kept = filter_valid_votes(votes, min_consistency)
    if not kept:
        raise ValueError("no valid votes after session filtering")
    if methods is None:
        methods = sorted({v.method_a for v in kept} | {v.method_b for v in kept})
    scores = []
    for cid in sorted({v.content_id for v in kept}):
        scores.extend(opinion_scores(tally(kept, methods, cid)))
    return scores


def write_scores_csv(scores, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["content_id", "method_id", "winning_times",
                         "total", "score"])
        for s in scores:
            writer.writerow([s.content_id, s.method_id, s.winning_times,
                             s.total, f"{s.score:.4f}"])


def read_scores_csv(path) -> list[OpinionScore]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        OpinionScore(content_id=r["content_id"], method_id=r["method_id"],
                     winning_times=int(r["winning_times"]),
                     total=int(r["total"]), score=float(r["score"]))
        for r in rows
    ]
