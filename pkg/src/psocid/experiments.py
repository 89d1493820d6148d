"""Monte Carlo and exhaustive experiments on the equality-probe search model."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import mpmath
import numpy as np

from . import __version__
from .errors import CapacityError, DomainError, UnsupportedError
from .info import (
    LogBase,
    partition_entropy,
    transcript_partitions,
    world_transcripts,
)
from .model import verification_rounds
from .strategies import Schedule, ScheduleKind, sample_hit_positions

SIMULATION_MAX_N = 24
AUDIT_MAX_N = 1 << 10
AUDIT_TOL = 1e-12
_TRIAL_BLOCK = 4096


@dataclass(frozen=True)
class PolySpec:
    """p(N) = ceil(coefficient * N**degree)."""

    degree: int
    coefficient: float = 1

    def __call__(self, N: int) -> int:
        p = math.ceil(Fraction(self.coefficient) * N ** self.degree)
        if p < 1:
            raise DomainError(f"p({N}) = {p} < 1")
        return p

    def scaled(self, factor: float) -> "PolySpec":
        return PolySpec(self.degree, self.coefficient * factor)


@dataclass(frozen=True)
class ExperimentConfig:
    n: Optional[int] = None
    N_sweep: Optional[tuple[int, ...]] = None
    p: Optional[int] = None
    poly: Optional[PolySpec] = None
    epsilon: float = 0.0
    trials: int = 1
    master_seed: int = 0
    schedule_kind: str = ScheduleKind.LEXICOGRAPHIC.value
    output_sink: Optional[str] = None
    output_format: str = "csv"

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.p is not None and self.p < 1:
            raise DomainError("p must be at least 1")
        if self.poly is not None:
            for N in self.N_sweep or ():
                self.poly(N)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.N_sweep is not None:
            d["N_sweep"] = list(self.N_sweep)
        return d

    def config_hash(self) -> str:
        """SHA-256 of the experiment settings; where results are written is excluded."""
        d = self.to_dict()
        d.pop("output_sink")
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def metadata(self) -> dict:
        return {
            "config_hash": self.config_hash(),
            "seed": self.master_seed,
            "artifact_version": __version__,
        }


# ---------------------------------------------------------------------------
# hit positions
# ---------------------------------------------------------------------------

def _block(args):
    kind, n, seed, start, stop = args
    return sample_hit_positions(kind, n, seed, start, stop)


def hit_positions(kind: Union[str, ScheduleKind], n: int, trials: int, seed: int,
                  workers: int = 1) -> np.ndarray:
    """Hit positions for ``trials`` seeded trials; identical for any ``workers``."""
    kind = ScheduleKind.parse(kind)
    if not kind.without_replacement:
        raise UnsupportedError("hit position is unbounded with replacement")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    blocks = [(kind, n, seed, s, min(trials, s + _TRIAL_BLOCK)) for s in range(0, trials, _TRIAL_BLOCK)]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block, blocks))
    else:
        parts = [_block(b) for b in blocks]
    return np.concatenate(parts)


def _exhaustive_positions(kind, n: int, seed: int) -> np.ndarray:
    sched = Schedule(kind, n, seed)
    return np.array([sched.position_of(w) for w in range(n)], dtype=np.int64)


@dataclass(frozen=True)
class HitTimeEstimate:
    n: int
    trials: int
    mean: float
    std_error: float
    reference: float

    @property
    def z(self) -> float:
        return (self.mean - self.reference) / self.std_error if self.std_error else 0.0


def expected_hit_time(n: int, trials: int = 1, seed: int = 0,
                      kind: Union[str, ScheduleKind] = ScheduleKind.LEXICOGRAPHIC,
                      exhaustive: bool = False, workers: int = 1) -> HitTimeEstimate:
    """Sample mean of the hit position Q against the reference (n + 1) / 2."""
    kind = ScheduleKind.parse(kind)
    if not kind.without_replacement:
        raise UnsupportedError("expected hit time needs a without-replacement schedule")
    if exhaustive:
        q = _exhaustive_positions(kind, n, seed)
        mean = float(Fraction(int(q.sum()), n))
        return HitTimeEstimate(n, n, mean, 0.0, (n + 1) / 2)
    q = hit_positions(kind, n, trials, seed, workers).astype(np.float64)
    se = float(q.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return HitTimeEstimate(n, trials, float(q.mean()), se, (n + 1) / 2)


@dataclass(frozen=True)
class SuccessPoint:
    q: int
    empirical: float
    analytic: float
    sigma: float


def success_curve(n: int, q_grid: Iterable[int], trials: int, seed: int,
                  kind: Union[str, ScheduleKind] = ScheduleKind.RANDOM_WITHOUT_REPLACEMENT,
                  workers: int = 1) -> list[SuccessPoint]:
    """Fraction of trials whose hit lands within the first q probes."""
    pos = hit_positions(kind, n, trials, seed, workers)
    out = []
    for q in q_grid:
        if not 0 <= q <= n:
            raise DomainError(f"q={q} outside [0, {n}]")
        p = q / n
        out.append(SuccessPoint(q, float(np.count_nonzero(pos <= q)) / trials, p,
                                math.sqrt(p * (1 - p) / trials)))
    return out


# ---------------------------------------------------------------------------
# rounds and the time-space tradeoff
# ---------------------------------------------------------------------------

def expected_search_rounds(n: int, p: int) -> float:
    """E[ceil(Q/p)] for Q uniform on 1..n, exactly."""
    a, r = divmod(n, p)
    return float(Fraction(p * a * (a + 1) // 2 + r * (a + 1), n))


@dataclass(frozen=True)
class RoundsResult:
    N: int
    p: int
    mean_t_search: float
    t_verify: int
    mean_t_total: float
    mode: str


def two_stage_rounds(N: int, p: int, trials: int = 1, seed: int = 0, analytic: bool = False,
                     kind: Union[str, ScheduleKind] = ScheduleKind.LEXICOGRAPHIC,
                     exhaustive: bool = False) -> RoundsResult:
    """Search rounds ceil(Q/p), verification rounds ceil(N/p), and their sum."""
    if p < 1:
        raise DomainError("p must be at least 1")
    n = 1 << N
    t_verify = verification_rounds(N, p)
    if exhaustive:
        if N > 16:
            raise CapacityError(f"exhaustive enumeration limited to N <= 16, got {N}")
        q = _exhaustive_positions(kind, n, seed)
        t_search = float(Fraction(int(((q + p - 1) // p).sum()), n))
        mode = "exhaustive"
    elif analytic:
        t_search = expected_search_rounds(n, p)
        mode = "analytic"
    else:
        if N > SIMULATION_MAX_N:
            raise CapacityError(f"direct simulation limited to N <= {SIMULATION_MAX_N}; use analytic mode")
        q = hit_positions(kind, n, trials, seed)
        t_search = float(((q + p - 1) // p).mean())
        mode = "simulated"
    return RoundsResult(N, p, t_search, t_verify, t_search + t_verify, mode)


@dataclass(frozen=True)
class TradeoffRow:
    N: int
    p: int
    S: int
    T_search_rounds: float
    T_verify_rounds: int
    T_total: float
    TS_product: float
    TS_over_2N: float
    mode: str


def tradeoff_table(N_sweep: Iterable[int], p_spec, c_S: int = 1, trials: int = 2000,
                   seed: int = 0, method: str = "auto") -> list[TradeoffRow]:
    """T, S and T*S per N with S = c_S * p(N) workspace bits.

    ``method``: "auto" simulates up to N = 24 and switches to the exact
    expectation above it; "simulated", "analytic" or "exhaustive" force one.
    """
    if c_S < 1:
        raise DomainError("c_S must be a positive integer")
    if isinstance(p_spec, int):
        p_spec = PolySpec(0, p_spec)
    rows = []
    for N in N_sweep:
        p = p_spec(N)
        m = method
        if m == "auto":
            m = "simulated" if N <= SIMULATION_MAX_N else "analytic"
        if m not in ("simulated", "analytic", "exhaustive"):
            raise DomainError(f"unknown method {method!r}")
        r = two_stage_rounds(N, p, trials, seed, analytic=m == "analytic", exhaustive=m == "exhaustive")
        S = c_S * p
        ts = r.mean_t_total * S
        rows.append(TradeoffRow(N, p, S, r.mean_t_search, r.t_verify, r.mean_t_total, ts,
                                ts / 2.0 ** N, r.mode))
    return rows


# ---------------------------------------------------------------------------
# decoder audits
# ---------------------------------------------------------------------------

class DecoderKind(str, enum.Enum):
    BAYES_OPTIMAL = "bayes"
    FIRST_CANDIDATE = "first"
    RANDOM_GUESS = "random"


def _decode(kind: DecoderKind, records, members: np.ndarray) -> Optional[tuple[int, ...]]:
    """Decoder output for one transcript: a set to guess uniformly from, None = all pages."""
    if kind is DecoderKind.BAYES_OPTIMAL:
        # posterior is uniform on the consistent worlds; break ties low
        return (int(members.min()),)
    if kind is DecoderKind.FIRST_CANDIDATE:
        if records and records[-1].y:
            return (records[-1].candidate,)
        return (records[0].candidate,) if records else (0,)
    return None


@dataclass(frozen=True)
class AuditReport:
    n: int
    q: int
    decoder: str
    p_error: Fraction
    cond_entropy_bits: float
    decoder_mi_bits: float
    transcript_mi_bits: float
    fano_bound_bits: float
    fano_ok: bool
    dpi_ok: bool

    @property
    def ok(self) -> bool:
        return self.fano_ok and self.dpi_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_error"] = str(self.p_error)
        return d


def _audit_one(n: int, q: int, kind: DecoderKind, labels: np.ndarray, transcripts,
               transcript_mi_bits: float) -> AuditReport:
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    hits = Fraction(0)
    joint_mass: Counter = Counter()  # |S| -> total block mass
    single: Counter = Counter()      # guessed page -> weight (unit L/|S| with |S| = 1)
    uniform_mass = 0                 # total block mass spread over all n pages
    for b, (s, size) in enumerate(zip(starts, sizes)):
        members = order[s:s + size]
        out = _decode(kind, transcripts[members[0]][:q], members)
        if out is None:
            hits += Fraction(int(size), n)
            joint_mass[n] += int(size)
            uniform_mass += int(size)
        else:
            k = len(out)
            correct = sum(1 for v in out if labels[v] == b)
            hits += correct if k == 1 else Fraction(correct, k)
            joint_mass[k] += int(size)
            share = int(size) if k == 1 else Fraction(int(size), k)
            for v in out:
                single[v] += share
    p_error = 1 - hits / n
    with mpmath.workprec(128):
        log = mpmath.log
        h_joint = mpmath.fsum(m * log(n * k) for k, m in joint_mass.items()) / n
        # P(w_hat = v) = (single[v] + uniform_mass / n) / n
        weights = Counter()
        base = Fraction(uniform_mass, n)
        for w in single.values():
            weights[Fraction(w) + base] += 1
        if base:
            weights[base] += n - len(single)
        h_hat = -mpmath.fsum(c * (mpmath.mpf(w.numerator) / (w.denominator * n))
                             * log(mpmath.mpf(w.numerator) / (w.denominator * n))
                             for w, c in weights.items() if w)
        h_cond = h_joint - h_hat
        mi = log(n) - h_cond
        pe = mpmath.mpf(p_error.numerator) / p_error.denominator
        h_pe = 0 if pe in (0, 1) else -pe * log(pe) - (1 - pe) * log(1 - pe)
        fano = h_pe + pe * log(n - 1)
        ln2 = log(2)
        cond_bits, mi_bits, fano_bits = float(h_cond / ln2), float(mi / ln2), float(fano / ln2)
        fano_ok = bool(h_cond / ln2 <= fano / ln2 + AUDIT_TOL)
        dpi_ok = bool(mi / ln2 <= transcript_mi_bits + AUDIT_TOL)
    return AuditReport(n, q, kind.value, p_error, cond_bits, mi_bits, transcript_mi_bits,
                       fano_bits, fano_ok, dpi_ok)


def _audit_inputs(n: int, schedule: Optional[Schedule]):
    if n > AUDIT_MAX_N:
        raise CapacityError(f"decoder audits enumerate exactly; n={n} exceeds {AUDIT_MAX_N}")
    return world_transcripts(n, schedule)


def decoder_audit(n: int, q: int, decoder_kind: Union[str, DecoderKind],
                  schedule: Optional[Schedule] = None) -> AuditReport:
    """Exact error probability and information of one decoder at one q."""
    kind = DecoderKind(decoder_kind)
    if not 0 <= q <= n:
        raise DomainError(f"q={q} outside [0, {n}]")
    transcripts = _audit_inputs(n, schedule)
    for i, labels in enumerate(transcript_partitions(n, q_max=q, transcripts=transcripts)):
        if i == q:
            return _audit_one(n, q, kind, labels, transcripts, partition_entropy(labels))


def decoder_audit_sweep(n: int, kinds: Sequence[Union[str, DecoderKind]] = tuple(DecoderKind),
                        schedule: Optional[Schedule] = None) -> list[AuditReport]:
    """Audit every decoder at every q in 0..n, sharing one enumeration."""
    kinds = [DecoderKind(k) for k in kinds]
    transcripts = _audit_inputs(n, schedule)
    out = []
    for q, labels in enumerate(transcript_partitions(n, q_max=n, transcripts=transcripts)):
        tmi = partition_entropy(labels, LogBase.BITS)
        out.extend(_audit_one(n, q, k, labels, transcripts, tmi) for k in kinds)
    return out
