"""Vote records and the durable append-only vote log.

The log is JSON lines: one record per line, UTF-8, LF endings. Tallies
are always recomputed from the log, never cached, so the log is the
single source of truth for a study.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, asdict
from pathlib import Path

VALID_CHOICES = ("A", "B")


class DuplicateVoteError(ValueError):
    """The same trial was submitted twice."""


@dataclass(frozen=True)
class VoteRecord:
    study_id: str
    subject_id: str
    content_id: str
    method_a: str
    method_b: str
    choice: str
    presented_left: str
    elapsed_ms: int
    is_sanity: bool
    timestamp_ms: int

    def __post_init__(self):
        if self.method_a == self.method_b:
            raise ValueError("method_a and method_b must differ")
        if self.choice not in VALID_CHOICES:
            raise ValueError(f"choice must be 'A' or 'B', got {self.choice!r}")
        if self.presented_left not in VALID_CHOICES:
            raise ValueError(
                f"presented_left must be 'A' or 'B', got {self.presented_left!r}")
        if int(self.elapsed_ms) <= 0:
            raise ValueError("elapsed_ms must be positive")
        if int(self.timestamp_ms) < 0:
            raise ValueError("timestamp_ms must be non-negative")

    @property
    def chosen_method(self) -> str:
        return self.method_a if self.choice == "A" else self.method_b

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.method_a, self.method_b)))

    def trial_key(self) -> tuple:
        """Identity of the trial this vote answers.

        One schedule holds at most one sanity repeat per (content, pair),
        so the sanity flag disambiguates repeats.
        """
        return (self.study_id, self.subject_id, self.content_id,
                self.pair, self.is_sanity)

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "VoteRecord":
        payload = json.loads(line)
        return cls(
            study_id=payload["study_id"],
            subject_id=payload["subject_id"],
            content_id=payload["content_id"],
            method_a=payload["method_a"],
            method_b=payload["method_b"],
            choice=payload["choice"],
            presented_left=payload["presented_left"],
            elapsed_ms=int(payload["elapsed_ms"]),
            is_sanity=bool(payload["is_sanity"]),
            timestamp_ms=int(payload["timestamp_ms"]),
        )


class VoteLog:
    """Append-only JSONL vote log with duplicate-trial rejection.

    Appends are serialized by a lock; the acknowledgment is the 1-based
    sequence number of the appended line. Reopening an existing log
    rebuilds the duplicate index from disk.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._seen: set[tuple] = set()
        self._count = 0
        if self.path.exists():
            for record in read_votes(self.path):
                self._seen.add(record.trial_key())
                self._count += 1
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    def append(self, record: VoteRecord) -> int:
        key = record.trial_key()
        with self._lock:
            if key in self._seen:
                raise DuplicateVoteError(f"trial already recorded: {key}")
            self._fh.write(record.to_json_line() + "\n")
            self._fh.flush()
            self._seen.add(key)
            self._count += 1
            return self._count

    def __len__(self) -> int:
        with self._lock:
            return self._count

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "VoteLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_votes(path) -> list[VoteRecord]:
    """Load every record from a JSONL vote log."""
    path = Path(path)
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(VoteRecord.from_json_line(line))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed vote record: {exc}")
    return records


def write_votes(path, records) -> None:
    """Write records to a fresh JSONL log (used by the simulator)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(record.to_json_line() + "\n")
