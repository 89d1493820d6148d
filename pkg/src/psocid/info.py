"""Information accounting for equality-probe transcripts.

Public functions report bits unless told otherwise; internally everything is
computed in nats and converted once on the way out.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

import mpmath
import numpy as np

from .errors import CapacityError, DomainError
from .model import Instance, run_search
from .strategies import Schedule, ScheduleKind

LN2 = math.log(2.0)

# Below this probability h(p) switches to a series for -(1-p)ln(1-p).
SMALL_P = 2.0 ** -30
# Longest chain-rule sum evaluated term by term; beyond it the asymptotic route.
SUMMATION_LIMIT = 1 << 24
# Lower end of the range where the asymptotic route is trusted.
ASYMPTOTIC_FLOOR = 1 << 20
_CHUNK = 1 << 16

BRUTE_FORCE_MAX_N = 1 << 16
BRUTE_FORCE_MAX_CELLS = 1 << 26
_MP_PREC = 128


class LogBase(enum.Enum):
    BITS = 2
    NATS = "e"

    def from_nats(self, value: float) -> float:
        return value / LN2 if self is LogBase.BITS else value

    def to_nats(self, value: float) -> float:
        return value * LN2 if self is LogBase.BITS else value


class RecoveryMode(str, enum.Enum):
    CHAIN_BOUND = "chain-bound"
    EXACT_MI = "exact-mi"


# ---------------------------------------------------------------------------
# entropy primitives
# ---------------------------------------------------------------------------

def _h_nats(p: float) -> float:
    if p == 0.0 or p == 1.0:
        return 0.0
    if p > 0.5:
        p = 1.0 - p  # exact for p in (1/2, 1)
    if p < SMALL_P:
        # -(1-p)ln(1-p) = p - p^2/2 - p^3/6 - p^4/12 - ...
        return p * (-math.log(p) + 1.0 - p * (0.5 + p * (1.0 / 6.0 + p / 12.0)))
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


def binary_entropy(p: float, base: LogBase = LogBase.BITS) -> float:
    """h(p) = -p log p - (1-p) log(1-p), with h(0) = h(1) = 0."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p} outside [0, 1]")
    return base.from_nats(_h_nats(p))


def _h_inv_nats(m: np.ndarray) -> np.ndarray:
    """h(1/m) in nats for an array of m >= 1."""
    m = np.asarray(m, dtype=np.float64)
    p = 1.0 / m
    tail = np.where(
        p < SMALL_P,
        p - p * p * (0.5 + p * (1.0 / 6.0)),
        -(1.0 - p) * np.log1p(-np.minimum(p, 0.5)),
    )
    out = np.log(m) * p + tail
    out[m == 1.0] = 0.0
    # m == 2: log1p(-0.5) branch is exact, nothing to patch
    return out


def per_probe_entropy(n: int, k: int, base: LogBase = LogBase.BITS) -> float:
    """Entropy of the k-th outcome given k-1 misses: h(1/(n-k+1))."""
    if not 1 <= k <= n:
        raise DomainError(f"probe index k={k} outside [1, {n}]")
    return binary_entropy(1.0 / (n - k + 1), base)


# ---------------------------------------------------------------------------
# chain-rule bound
# ---------------------------------------------------------------------------

def _m_range(hi: int, lo: int) -> np.ndarray:
    """The integers hi, hi-1, ..., lo+1 as float64."""
    if hi < (1 << 62):
        return np.arange(hi, lo, -1, dtype=np.int64).astype(np.float64)
    return float(hi) - np.arange(0, hi - lo, dtype=np.float64)


def _direct_sum(lo: int, hi: int) -> float:
    """Sum of h(1/m) in nats over m in (lo, hi], chunked and exactly rounded."""
    parts = []
    top = hi
    while top > lo:
        bottom = max(lo, top - _CHUNK)
        parts.append(math.fsum(_h_inv_nats(_m_range(top, bottom))))
        top = bottom
    return math.fsum(parts)


def _entropy_sum_nats(lo: int, hi: int) -> float:
    """Sum of h(1/m) in nats over m in (lo, hi]."""
    if hi - lo <= SUMMATION_LIMIT:
        return _direct_sum(lo, hi)
    from .asymptotics import euler_maclaurin_entropy_sum

    mid = max(lo, ASYMPTOTIC_FLOOR)
    head = _direct_sum(lo, mid) if mid > lo else 0.0
    return head + euler_maclaurin_entropy_sum(mid, hi)


def chain_rule_bound(n: int, q: int, base: LogBase = LogBase.BITS) -> float:
    """Upper bound on I(w*; first q outcomes): sum_{k<=q} h(1/(n-k+1))."""
    if not 0 <= q <= n:
        raise DomainError(f"q={q} outside [0, n={n}]")
    if q == 0:
        return 0.0
    return base.from_nats(_entropy_sum_nats(n - q, n))


class _ChainPrefix:
    """Prefix sums of the chain-rule terms for repeated queries at one n."""

    def __init__(self, n: int):
        self.n = n
        self._chunks: list[float] = []

    def _chunk(self, c: int) -> float:
        while len(self._chunks) <= c:
            i = len(self._chunks)
            hi = self.n - i * _CHUNK
            self._chunks.append(math.fsum(_h_inv_nats(_m_range(hi, max(0, hi - _CHUNK)))))
        return self._chunks[c]

    def __call__(self, q: int) -> float:
        full, rest = divmod(q, _CHUNK)
        parts = [self._chunk(c) for c in range(full)]
        if rest:
            hi = self.n - full * _CHUNK
            parts.append(math.fsum(_h_inv_nats(_m_range(hi, hi - rest))))
        return math.fsum(parts)


# ---------------------------------------------------------------------------
# exact transcript information
# ---------------------------------------------------------------------------

def exact_transcript_mi(n: int, q: int, base: LogBase = LogBase.BITS) -> float:
    """I(w*; F_q) for a public without-replacement schedule and uniform w*.

    The transcript either reveals the hit position (q outcomes, each with
    mass 1/n) or says "all q missed" (mass (n-q)/n).
    """
    if not 0 <= q <= n:
        raise DomainError(f"q={q} outside [0, n={n}]")
    if q == 0:
        return 0.0
    u = q / n
    miss = 0.0 if q == n else -(1.0 - u) * math.log1p(-u)
    return base.from_nats(u * math.log(n) + miss)


def world_transcripts(n: int, schedule: Optional[Schedule] = None, q_max: Optional[int] = None):
    """Run the search once per hidden index with p = 1 and at most q_max probes."""
    bits = n.bit_length() - 1
    if n < 2 or n != 1 << bits:
        raise DomainError(f"enumeration needs n a power of two >= 2, got {n}")
    if n > BRUTE_FORCE_MAX_N:
        raise CapacityError(f"n={n} exceeds exhaustive enumeration limit {BRUTE_FORCE_MAX_N}")
    q_max = n if q_max is None else q_max
    if not 0 <= q_max <= n:
        raise DomainError(f"q={q_max} outside [0, n={n}]")
    if n * q_max > BRUTE_FORCE_MAX_CELLS:
        raise CapacityError(f"n*q={n * q_max} exceeds enumeration budget {BRUTE_FORCE_MAX_CELLS}")
    schedule = schedule or Schedule(ScheduleKind.LEXICOGRAPHIC, n)
    if schedule.n != n:
        raise DomainError(f"schedule built for n={schedule.n}")
    if q_max == 0:
        return [()] * n
    key = bytes(32)
    return [
        run_search(Instance(bits, w, key=key), schedule.fresh(), 1, q_max).transcript.records
        for w in range(n)
    ]


def transcript_partitions(n: int, schedule: Optional[Schedule] = None, q_max: Optional[int] = None,
                          transcripts=None) -> Iterator[np.ndarray]:
    """Yield, for q = 0..q_max, labels grouping hidden indices by identical F_q.

    Two worlds share a label iff their first q probe records coincide; a world
    whose search already halted contributes no further records.
    """
    q_max = n if q_max is None else q_max
    if transcripts is None:
        transcripts = world_transcripts(n, schedule, q_max)
    codes = np.full((n, q_max), -1, dtype=np.int64)
    for w, recs in enumerate(transcripts):
        for k, r in enumerate(recs[:q_max]):
            codes[w, k] = 2 * r.candidate + r.y
    labels = np.zeros(n, dtype=np.int64)
    yield labels
    width = 2 * n + 1
    for k in range(q_max):
        _, labels = np.unique(labels * width + codes[:, k] + 1, return_inverse=True)
        labels = labels.reshape(-1)
        yield labels


def _xlogx_sum(counts: np.ndarray) -> mpmath.mpf:
    """sum c*ln(c) over positive integer counts, in extended precision."""
    values, mult = np.unique(counts[counts > 1], return_counts=True)
    with mpmath.workprec(_MP_PREC):
        return mpmath.fsum(int(m) * mpmath.mpf(int(v)) * mpmath.log(int(v)) for v, m in zip(values, mult))


def partition_entropy(labels: np.ndarray, base: LogBase = LogBase.BITS) -> float:
    """Entropy of the block containing a uniformly drawn world."""
    n = len(labels)
    counts = np.bincount(labels)
    with mpmath.workprec(_MP_PREC):
        h = mpmath.log(n) - _xlogx_sum(counts) / n
    return base.from_nats(float(h))


def brute_force_mi_curve(n: int, schedule: Optional[Schedule] = None, q_max: Optional[int] = None,
                         base: LogBase = LogBase.BITS) -> np.ndarray:
    """I(w*; F_q) for every q in 0..q_max by enumerating all n hidden indices.

    The schedule must be deterministic (fixed seed), so H(F_q | w*) = 0 and
    the mutual information is the entropy of the transcript distribution.
    """
    return np.array([partition_entropy(lab, base) for lab in transcript_partitions(n, schedule, q_max)])


def brute_force_mi(n: int, q: int, schedule: Optional[Schedule] = None,
                   base: LogBase = LogBase.BITS) -> float:
    if not 0 <= q <= n:
        raise DomainError(f"q={q} outside [0, n={n}]")
    return float(brute_force_mi_curve(n, schedule, q, base)[q])


# ---------------------------------------------------------------------------
# Fano requirements and probe thresholds
# ---------------------------------------------------------------------------

def fano_required_info(n: int, epsilon: float, exact: bool = True,
                       base: LogBase = LogBase.BITS) -> float:
    """Mutual information needed to recover w* with error at most epsilon.

    exact: log n - h(eps) - eps log(n-1); otherwise (1-eps) log n - h(eps).
    """
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon={epsilon} outside [0, 1)")
    h = _h_nats(epsilon)
    if exact:
        val = math.log(n) - h - epsilon * math.log(n - 1)
    else:
        val = (1.0 - epsilon) * math.log(n) - h
    return base.from_nats(val)


def fano_posterior_bound(p_error: float, n: int, base: LogBase = LogBase.BITS) -> float:
    """Fano ceiling on H(w* | w_hat): h(Pe) + Pe log(n-1)."""
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    pe = float(p_error)
    if not 0.0 <= pe <= 1.0 - 1.0 / n + 1e-15:
        raise DomainError(f"error probability {pe} outside [0, 1-1/n]")
    return base.from_nats(_h_nats(min(pe, 1.0)) + pe * math.log(n - 1))


class ProbeCount(int):
    """An int probe count that also records whether the target was reached."""

    reached: bool

    def __new__(cls, value: int, reached: bool = True):
        obj = super().__new__(cls, value)
        obj.reached = reached
        return obj


def _tolerance(target: float) -> float:
    return 1e-12 * max(1.0, abs(target))


def _bisect_min(measure, target: float, n: int) -> ProbeCount:
    """Smallest q in [0, n] with measure(q) >= target, measure nondecreasing."""
    tol = _tolerance(target)
    if measure(0) >= target - tol:
        return ProbeCount(0)
    if measure(n) < target - tol:
        return ProbeCount(n, reached=False)
    lo, hi = 0, n  # measure(lo) fails, measure(hi) passes
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if measure(mid) >= target - tol:
            hi = mid
        else:
            lo = mid
    return ProbeCount(hi)


def min_probes_for_recovery(n: int, epsilon: float,
                            mode: Union[str, RecoveryMode] = RecoveryMode.CHAIN_BOUND) -> ProbeCount:
    """Fewest probes whose information reaches the exact Fano requirement."""
    mode = RecoveryMode(mode)
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if not 0.0 <= epsilon < 1.0 / 3.0:
        raise DomainError(f"epsilon={epsilon} outside [0, 1/3)")
    target = fano_required_info(n, epsilon, exact=True, base=LogBase.NATS)
    if mode is RecoveryMode.EXACT_MI:
        measure = lambda q: exact_transcript_mi(n, q, LogBase.NATS)
    elif n <= SUMMATION_LIMIT:
        measure = _ChainPrefix(n)
    else:
        measure = lambda q: chain_rule_bound(n, q, LogBase.NATS)
    return _bisect_min(measure, target, n)


def poly_probe_info(N: int, poly_degree: int, coefficient: float = 1) -> float:
    """Chain-rule information (bits) of ceil(coefficient * N**degree) probes on 2**N pages."""
    if N < 2:
        raise DomainError(f"N must be at least 2, got {N}")
    q = math.ceil(Fraction(coefficient) * N ** poly_degree)
    if q < 0 or q > 1 << N:
        raise DomainError(f"probe budget q={q} outside [0, 2**{N}]")
    return chain_rule_bound(1 << N, q, LogBase.BITS)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    n: int
    q: int
    epsilon: float
    chain_bound_bits: float
    exact_mi_bits: float
    fano_required_bits: float
    satisfied: bool

    FIELDS = ("n", "q", "epsilon", "chain_bound_bits", "exact_mi_bits", "fano_required_bits", "satisfied")

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(n: int, q: int, epsilon: float = 0.0) -> BoundReport:
    chain = chain_rule_bound(n, q)
    required = fano_required_info(n, epsilon, exact=True)
    return BoundReport(
        n=n,
        q=q,
        epsilon=epsilon,
        chain_bound_bits=chain,
        exact_mi_bits=exact_transcript_mi(n, q),
        fano_required_bits=required,
        satisfied=chain >= required - _tolerance(required),
    )
