"""Instances, probe transcripts and the two-stage search/verification protocol.

The library of ``n = 2**N`` pages is never materialized: an instance is just
its bit length, the hidden index and the key used to mint its mark token.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import DomainError

TOKEN_SIZE = 32


@dataclass(frozen=True)
class Instance:
    """A hidden world: ``2**bit_length`` pages, page ``w_star`` is marked."""

    bit_length: int
    w_star: int
    key: bytes = field(default_factory=lambda: secrets.token_bytes(32), repr=False, compare=False)

    def __post_init__(self):
        if self.bit_length < 1:
            raise DomainError(f"bit length must be positive, got {self.bit_length}")
        if not 0 <= self.w_star < self.n:
            raise DomainError(f"w_star={self.w_star} outside [0, {self.n})")

    @property
    def n(self) -> int:
        return 1 << self.bit_length

    @classmethod
    def random(cls, bit_length: int, rng: np.random.Generator) -> "Instance":
        """Uniform hidden index; the token key is drawn from the same stream."""
        n = 1 << bit_length
        if n <= 1 << 63:
            w = int(rng.integers(0, n))
        else:
            w = int.from_bytes(rng.bytes((bit_length + 7) // 8), "little") & (n - 1)
        return cls(bit_length, w, key=rng.bytes(32))

    def mark_token(self) -> bytes:
        """Canonical 32-byte token for the marked page (keyed SHA-256)."""
        msg = f"{self.bit_length}:{self.w_star}".encode()
        return hmac.new(self.key, msg, hashlib.sha256).digest()

    def format_index(self, index: int) -> str:
        return format(index, f"0{self.bit_length}b")


@dataclass(frozen=True, slots=True)
class ProbeRecord:
    t: int
    j: int
    candidate: int
    y: int

    def to_dict(self) -> dict:
        return {"t": self.t, "j": self.j, "candidate": self.candidate, "y": self.y}


@dataclass(frozen=True)
class Transcript:
    """Probe records flattened in lexicographic ``(t, j)`` order."""

    records: tuple[ProbeRecord, ...] = ()

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=lambda r: (r.t, r.j)))
        object.__setattr__(self, "records", recs)
        hits = [i for i, r in enumerate(recs) if r.y]
        if len(hits) > 1 or (hits and hits[0] != len(recs) - 1):
            raise DomainError("a transcript may hold at most one hit, as its last record")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ProbeRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def outcomes(self) -> list[int]:
        return [r.y for r in self.records]

    @property
    def candidates(self) -> list[int]:
        return [r.candidate for r in self.records]

    @property
    def hit(self) -> Optional[ProbeRecord]:
        if self.records and self.records[-1].y:
            return self.records[-1]
        return None

    def prefix(self, q: int) -> "Transcript":
        return Transcript(self.records[:q])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        recs = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                if "metadata" in d:
                    continue
                recs.append(ProbeRecord(int(d["t"]), int(d["j"]), int(d["candidate"]), int(d["y"])))
        return cls(tuple(recs))


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one search run. ``t_search is None`` means not found."""

    t_search: Optional[int]
    winning_searcher: Optional[int]
    transcript: Transcript
    p: int
    rounds: int

    @property
    def found(self) -> bool:
        return self.t_search is not None

    @property
    def q(self) -> int:
        """Probes actually issued (the hit round may be cut short)."""
        return len(self.transcript)

    @property
    def q_rounds(self) -> int:
        """Per-round accounting: every executed round counts ``p`` probes."""
        return self.rounds * self.p

    @property
    def hit_candidate(self) -> Optional[int]:
        hit = self.transcript.hit
        return hit.candidate if hit else None


@dataclass(frozen=True)
class Certificate:
    claimed_index: int
    mark_token: bytes


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT_INDEX = "reject:wrong-index"
    REJECT_TOKEN = "reject:bad-token"
    MALFORMED = "reject:malformed"

    @property
    def accepted(self) -> bool:
        return self is Verdict.ACCEPT


def eq_probe(instance: Instance, candidate: int) -> int:
    if not 0 <= candidate < instance.n:
        raise DomainError(f"candidate {candidate} outside [0, {instance.n})")
    return int(candidate == instance.w_star)


def run_search(instance: Instance, schedule, p: int, max_rounds: int) -> SearchResult:
    """Run rounds of ``p`` parallel equality probes until the first hit.

    Probes of the hit round after the winning searcher are not issued. When a
    without-replacement schedule has fewer than ``p`` candidates left, the
    final round is issued partially.
    """
    if p < 1 or max_rounds < 1:
        raise DomainError("p and max_rounds must be positive")
    if schedule.n != instance.n:
        raise DomainError(f"schedule built for n={schedule.n}, instance has n={instance.n}")
    records: list[ProbeRecord] = []
    for t in range(1, max_rounds + 1):
        remaining = schedule.remaining
        demand = p if remaining is None or remaining == 0 else min(p, remaining)
        batch = schedule.next_batch(records, demand)
        for j, c in enumerate(batch, start=1):
            y = eq_probe(instance, c)
            records.append(ProbeRecord(t, j, int(c), y))
            if y:
                return SearchResult(t, j, Transcript(tuple(records)), p, t)
    return SearchResult(None, None, Transcript(tuple(records)), p, max_rounds)


def honest_certificate(instance: Instance, result: Optional[SearchResult] = None) -> Certificate:
    """Certificate a successful searcher would report.

    With ``result`` given, the claimed index is the hit candidate of that run.
    """
    if result is None:
        index = instance.w_star
    elif not result.found:
        raise DomainError("cannot certify an unsuccessful search")
    else:
        index = result.hit_candidate
    return Certificate(index, instance.mark_token())


def verify_certificate(instance: Instance, cert: Certificate) -> Verdict:
    token = bytes(cert.mark_token)
    if len(token) != TOKEN_SIZE:
        return Verdict.MALFORMED
    token_ok = hmac.compare_digest(token, instance.mark_token())
    if not token_ok:
        return Verdict.REJECT_TOKEN
    if cert.claimed_index != instance.w_star:
        return Verdict.REJECT_INDEX
    return Verdict.ACCEPT


def verification_rounds(N: int, p: int) -> int:
    """One-way rounds needed to ship an N-bit index at p bits per round."""
    if N < 1 or p < 1:
        raise DomainError("N and p must be positive")
    return -(-N // p)
