"""Two-alternative forced-choice study engine.

Scheduling, vote recording, sanity checking, tallying, opinion-score
aggregation, a simulation oracle for desk-scale runs, and the HTTP
session API used by the browser frontend.
"""

from .records import VoteRecord, VoteLog, DuplicateVoteError, read_votes
from .scheduling import Trial, TrialSchedule, SanityResult, schedule_trials, sanity_check
from .aggregate import (
    PairwiseTally,
    OpinionScore,
    IncompleteTallyError,
    tally,
    opinion_scores,
    aggregate_votes,
    filter_valid_votes,
    write_scores_csv,
    read_scores_csv,
)
from .simulate import simulate_votes

__all__ = [
    "VoteRecord", "VoteLog", "DuplicateVoteError", "read_votes",
    "Trial", "TrialSchedule", "SanityResult", "schedule_trials", "sanity_check",
    "PairwiseTally", "OpinionScore", "IncompleteTallyError", "tally",
    "opinion_scores", "aggregate_votes", "filter_valid_votes",
    "write_scores_csv", "read_scores_csv", "simulate_votes",
]
