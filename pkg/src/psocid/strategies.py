"""Probing schedules.

A schedule hands out batches of candidates to the ``p`` searchers of each
round. All kinds except ``RANDOM_WITH_REPLACEMENT`` never repeat a candidate
within one run.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DomainError, ProtocolViolation, ScriptError, UnsupportedError
from .rng import child_seed, generator, trial_generator

Policy = Callable[[Sequence, int], Sequence[int]]


class ScheduleKind(str, enum.Enum):
    LEXICOGRAPHIC = "lex"
    RANDOM_WITHOUT_REPLACEMENT = "random"
    RANDOM_WITH_REPLACEMENT = "replace"
    ADAPTIVE_SCRIPTED = "scripted"

    @property
    def without_replacement(self) -> bool:
        return self is not ScheduleKind.RANDOM_WITH_REPLACEMENT

    @classmethod
    def parse(cls, value: Union[str, "ScheduleKind"]) -> "ScheduleKind":
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        for kind in cls:
            if value in (kind.value, kind.name.lower()):
                return kind
        raise DomainError(f"unknown schedule kind {value!r}")


class Schedule:
    """Stateful candidate source for a single search run.

    ``script`` (ADAPTIVE_SCRIPTED only) is either a fixed candidate list,
    consumed in order, or a policy ``f(history, p) -> batch`` that may look at
    the full probe history.  Use :meth:`fresh` to get an independent copy
    with reset state for another run.
    """

    def __init__(
        self,
        kind: Union[str, ScheduleKind],
        n: int,
        seed: int = 0,
        script: Optional[Union[Sequence[int], Policy]] = None,
    ):
        self.kind = ScheduleKind.parse(kind)
        if n < 1:
            raise DomainError(f"library size must be positive, got {n}")
        self.n = int(n)
        self.seed = int(seed)
        self._policy: Optional[Policy] = None
        self._script: Optional[list[int]] = None
        if self.kind is ScheduleKind.ADAPTIVE_SCRIPTED:
            if script is None:
                raise ScriptError("scripted schedule needs a script")
            if callable(script):
                self._policy = script
            else:
                self._script = [int(c) for c in script]
                _check_candidates(self._script, self.n)
                if len(set(self._script)) != len(self._script):
                    raise ScriptError("script repeats a candidate")
        elif script is not None:
            raise ScriptError(f"{self.kind.name} schedules take no script")
        self._script_source = script
        self._perm: Optional[np.ndarray] = None
        self._inverse: Optional[np.ndarray] = None
        self._rng = generator(self.seed) if self.kind is ScheduleKind.RANDOM_WITH_REPLACEMENT else None
        self._cursor = 0
        self._seen: set[int] = set()

    def __repr__(self):
        return f"Schedule({self.kind.value!r}, n={self.n}, seed={self.seed})"

    def fresh(self) -> "Schedule":
        return Schedule(self.kind, self.n, self.seed, self._script_source)

    @property
    def consumed(self) -> int:
        return self._cursor

    @property
    def remaining(self) -> Optional[int]:
        """Candidates left to hand out, or None when unbounded/unknown."""
        if self.kind is ScheduleKind.RANDOM_WITH_REPLACEMENT or self._policy is not None:
            return None
        if self._script is not None:
            return len(self._script) - self._cursor
        return self.n - self._cursor

    def _permutation(self) -> np.ndarray:
        if self._perm is None:
            self._perm = generator(self.seed).permutation(self.n)
        return self._perm

    def next_batch(self, history: Sequence, p: int) -> list[int]:
        if p < 1:
            raise DomainError("batch size must be positive")
        kind = self.kind
        if kind is ScheduleKind.RANDOM_WITH_REPLACEMENT:
            self._cursor += p
            return [int(c) for c in self._rng.integers(0, self.n, size=p)]
        if self._policy is not None:
            batch = [int(c) for c in self._policy(history, p)]
            if len(batch) != p:
                raise ScriptError(f"policy returned {len(batch)} candidates, {p} requested")
            _check_candidates(batch, self.n)
            if self._seen.intersection(batch) or len(set(batch)) != p:
                raise ScriptError("policy repeated a candidate")
            self._seen.update(batch)
            self._cursor += p
            return batch
        left = self.remaining
        if left < p:
            if self._script is not None:
                raise ScriptError(f"script has {left} entries left, {p} requested")
            raise ProtocolViolation(f"schedule has {left} unvisited candidates, {p} requested")
        start, self._cursor = self._cursor, self._cursor + p
        if kind is ScheduleKind.LEXICOGRAPHIC:
            return list(range(start, start + p))
        if kind is ScheduleKind.RANDOM_WITHOUT_REPLACEMENT:
            return [int(c) for c in self._permutation()[start:start + p]]
        return self._script[start:start + p]

    def position_of(self, candidate: int) -> Optional[int]:
        """1-based flattened position at which ``candidate`` is probed.

        Defined for non-adaptive without-replacement schedules, where the probe
        order does not depend on outcomes. Returns None if never probed.
        """
        if not 0 <= candidate < self.n:
            raise DomainError(f"candidate {candidate} outside [0, {self.n})")
        kind = self.kind
        if kind is ScheduleKind.LEXICOGRAPHIC:
            return candidate + 1
        if kind is ScheduleKind.RANDOM_WITHOUT_REPLACEMENT:
            if self._inverse is None:
                perm = self._permutation()
                self._inverse = np.empty_like(perm)
                self._inverse[perm] = np.arange(1, self.n + 1)
            return int(self._inverse[candidate])
        if self._script is not None:
            try:
                return self._script.index(candidate) + 1
            except ValueError:
                return None
        raise UnsupportedError(f"hit position is not fixed for {kind.name} schedules")


def _check_candidates(cands: Sequence[int], n: int) -> None:
    bad = [c for c in cands if not 0 <= c < n]
    if bad:
        raise ScriptError(f"candidates outside [0, {n}): {bad[:5]}")


def next_batch(schedule: Schedule, history: Sequence, p: int) -> list[int]:
    return schedule.next_batch(history, p)


def load_script(path: Union[str, Path]) -> list[int]:
    """Read a scripted schedule from a JSON array of candidate integers."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in data):
        raise ScriptError(f"{path}: expected a JSON array of integers")
    return data


def sample_hit_positions(
    kind: Union[str, ScheduleKind],
    n: int,
    seed: int,
    start: int,
    stop: int,
    script: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Flattened hit positions Q for trials ``start..stop-1`` of a seeded run.

    Trial ``i`` draws the hidden index and the schedule seed from its own
    stream ``(seed, i)``, so any partitioning of the trial range gives the
    same values.
    """
    kind = ScheduleKind.parse(kind)
    if not kind.without_replacement:
        raise UnsupportedError("hit position is unbounded with replacement")
    out = np.empty(stop - start, dtype=np.int64)
    shared = Schedule(kind, n, 0, script) if kind is not ScheduleKind.RANDOM_WITHOUT_REPLACEMENT else None
    for i in range(start, stop):
        rng = trial_generator(seed, i)
        w = int(rng.integers(0, n))
        sched = shared if shared is not None else Schedule(kind, n, child_seed(rng))
        pos = sched.position_of(w)
        if pos is None:
            raise ScriptError(f"script never probes candidate {w}")
        out[i - start] = pos
    return out


@dataclass(frozen=True)
class HitHistogram:
    counts: np.ndarray  # counts[k-1] = trials whose hit came at position k
    chi2: float
    p_value: float

    @property
    def trials(self) -> int:
        return int(self.counts.sum())


def hit_position_distribution(
    kind: Union[str, ScheduleKind],
    n: int,
    trials: int = 0,
    seed: int = 0,
    exhaustive: bool = False,
    script: Optional[Sequence[int]] = None,
) -> HitHistogram:
    """Histogram of the hit position Q over uniformly drawn hidden indices.

    ``exhaustive`` runs one schedule (seeded by ``seed``) against every hidden
    index once instead of sampling.
    """
    kind = ScheduleKind.parse(kind)
    if not kind.without_replacement:
        raise UnsupportedError("hit position is unbounded with replacement")
    if exhaustive:
        sched = Schedule(kind, n, seed, script)
        positions = np.array([sched.position_of(w) for w in range(n)], dtype=np.int64)
    else:
        if trials < 1:
            raise DomainError("trials must be at least 1")
        positions = sample_hit_positions(kind, n, seed, 0, trials, script)
    counts = np.bincount(positions - 1, minlength=n)
    if n > 1:
        res = stats.chisquare(counts)
        chi2, pval = float(res.statistic), float(res.pvalue)
    else:
        chi2, pval = 0.0, 1.0
    return HitHistogram(counts, chi2, pval)
