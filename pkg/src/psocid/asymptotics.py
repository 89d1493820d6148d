"""Large-n behaviour of the accumulated probe information.

Everything here works in nats. The central approximation is

    sum_{k<=q} h(1/(n-k+1))  ~  (ln n + 1) x - x**2 / 2,   x = ln(n / (n - q)),

which turns the probe-threshold question into a quadratic in ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

LN2 = math.log(2.0)
GAMMA_PRIME_REFERENCE = -0.7885305659

MIN_CUTOFF = 1000
_CHUNK = 1 << 20
# Terms kept in the 1/x expansion of -(1-1/x) ln(1-1/x) - 1/x.
_SERIES_TERMS = 16


def _h_nats(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


def closed_form_sum(n: int, q: int) -> float:
    """(ln n + 1) x - x**2/2 with x = ln(n/(n-q)); q = n is a pole."""
    if not 0 <= q < n:
        if q == n:
            raise DomainError("closed form diverges at q = n; use the exact chain-rule sum")
        raise DomainError(f"q={q} outside [0, n={n})")
    x = -math.log1p(-q / n)
    return (math.log(n) + 1.0) * x - 0.5 * x * x


def _g_minus_inv_antiderivative(x: float) -> float:
    # d/dx of this equals -(1-1/x) ln(1-1/x) - 1/x, valid for x >= 2.
    return sum(x ** (1 - k) / (k * (k - 1) ** 2) for k in range(2, _SERIES_TERMS + 2))


def _entropy_term(x: float) -> float:
    """h(1/x) in nats."""
    p = 1.0 / x
    return math.log(x) * p - (1.0 - p) * math.log1p(-p)


def _entropy_term_derivative(x: float) -> float:
    # d/dx [ln x / x] + d/dx [-(1-1/x) ln(1-1/x)]
    return (1.0 - math.log(x)) / (x * x) - (math.log1p(-1.0 / x) + 1.0) / (x * x)


def euler_maclaurin_entropy_sum(a: int, b: int) -> float:
    """sum_{m=a+1}^{b} h(1/m) in nats for large a, via Euler-Maclaurin.

    Integral part is exactly the closed form above; the end corrections
    (f(b) - f(a))/2 + (f'(b) - f'(a))/12 leave an error of order 1/a**4.
    """
    if a < 2 or b < a:
        raise DomainError(f"need 2 <= a <= b, got a={a}, b={b}")
    if a == b:
        return 0.0
    la, lb = math.log(a), math.log(b)
    x = lb - la
    integral = 0.5 * x * (la + lb) + x
    integral += _g_minus_inv_antiderivative(b) - _g_minus_inv_antiderivative(a)
    ends = 0.5 * (_entropy_term(b) - _entropy_term(a))
    ends += (_entropy_term_derivative(b) - _entropy_term_derivative(a)) / 12.0
    return integral + ends


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdSolution:
    n: int
    epsilon: float
    x: float
    fraction: float
    q_continuous: float
    q_integer: int


def quadratic_coefficients(n: int, epsilon: float) -> tuple[float, float]:
    """(b, c) of x**2 - 2 b x + c = 0."""
    ln_n = math.log(n)
    b = ln_n + 1.0
    c = 2.0 * (1.0 - epsilon) * ln_n - 2.0 * _h_nats(epsilon)
    return b, c


def solve_threshold(n: int, epsilon: float) -> ThresholdSolution:
    """Smallest x where (ln n + 1) x - x**2/2 meets (1-eps) ln n - ln2 h(eps).

    ``_h_nats`` already carries the ln 2 factor of the bit-valued h. The root
    b - sqrt(b**2 - c) is evaluated as c / (b + sqrt(b**2 - c)).
    """
    if n < 4:
        raise DomainError(f"n must be at least 4, got {n}")
    if not 0.0 <= epsilon < 1.0 / 3.0:
        raise DomainError(f"epsilon={epsilon} outside [0, 1/3)")
    b, c = quadratic_coefficients(n, epsilon)
    disc = b * b - c
    assert disc > 0.0, "discriminant is positive for n >= 4"
    x = c / (b + math.sqrt(disc))
    fraction = -math.expm1(-x)
    q_cont = fraction * n
    return ThresholdSolution(n, epsilon, x, fraction, q_cont, math.ceil(q_cont))


def limit_fraction(epsilon: float) -> float:
    """Limiting probe fraction 1 - exp(-(1 - eps))."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon={epsilon} outside [0, 1]")
    return -math.expm1(-(1.0 - epsilon))


def extrapolate_fraction(ns: Sequence[int], fractions: Sequence[float]) -> float:
    """Intercept of a least-squares fit fraction ~ a + b / (ln n + 1).

    The threshold fraction approaches its limit like 1/ln n, so the intercept
    estimates the n -> infinity value.
    """
    u = np.array([1.0 / (math.log(n) + 1.0) for n in ns])
    a, _ = np.polynomial.polynomial.polyfit(u, np.asarray(fractions, dtype=float), 1)
    return float(a)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantEstimate:
    constant_name: str
    M: int
    estimate: float
    corrected: float
    delta_last_doubling: float  # |corrected(M) - corrected(M // 2)|
    converged: bool


def _partial_sums(term, M: int) -> tuple[float, float]:
    """(sum_{m=2}^{M//2} term, sum_{m=2}^{M} term), exactly rounded per chunk."""
    half = M // 2
    lo_parts, hi_parts = [], []
    start = 2
    while start <= M:
        stop = min(M + 1, start + _CHUNK)
        if start <= half < stop - 1:
            stop = half + 1
        m = np.arange(start, stop, dtype=np.float64)
        s = math.fsum(term(m))
        (lo_parts if stop - 1 <= half else hi_parts).append(s)
        start = stop
    low = math.fsum(lo_parts)
    return low, math.fsum([low] + hi_parts)


def _log_over_m(m):
    return np.log(m) / m


def _g(m):
    return -(1.0 - 1.0 / m) * np.log1p(-1.0 / m)


def _gamma1_tail(M: int) -> float:
    # Euler-Maclaurin: sum_{m>M} f - int_M^inf f = -f(M)/2 - f'(M)/12
    lm = math.log(M)
    return -0.5 * lm / M - (1.0 - lm) / (12.0 * M * M)


def _gamma_prime_tail(M: int) -> float:
    g = -(1.0 - 1.0 / M) * math.log1p(-1.0 / M)
    dg = -(math.log1p(-1.0 / M) + 1.0) / (M * M)
    return -_g_minus_inv_antiderivative(M) - 0.5 * g - dg / 12.0


def _check_cutoff(M: int) -> bool:
    if M < 2:
        raise DomainError(f"cutoff M={M} too small")
    return M >= MIN_CUTOFF


def gamma1_estimate(M: int) -> ConstantEstimate:
    """Constant term of sum_{m=2}^{M} ln(m)/m - (ln M)**2 / 2 (first Stieltjes constant)."""
    ok = _check_cutoff(M)
    low, full = _partial_sums(_log_over_m, M)
    half = M // 2
    est = full - 0.5 * math.log(M) ** 2
    corr = est + _gamma1_tail(M)
    corr_half = low - 0.5 * math.log(half) ** 2 + _gamma1_tail(half)
    return ConstantEstimate("gamma1", M, est, corr, abs(corr - corr_half), ok)


def gamma_prime_estimate(M: int) -> ConstantEstimate:
    """Constant term of -sum_{m=2}^{M} (1-1/m) ln(1-1/m) - ln M."""
    ok = _check_cutoff(M)
    low, full = _partial_sums(_g, M)
    half = M // 2
    est = full - math.log(M)
    corr = est + _gamma_prime_tail(M)
    corr_half = low - math.log(half) + _gamma_prime_tail(half)
    return ConstantEstimate("gamma_prime", M, est, corr, abs(corr - corr_half), ok)


ESTIMATORS = {"gamma1": gamma1_estimate, "gamma-prime": gamma_prime_estimate}


def convergence_table(which: str, cutoffs: Iterable[int]) -> list[ConstantEstimate]:
    est = ESTIMATORS[which]
    return [est(M) for M in cutoffs]


# ---------------------------------------------------------------------------
# polynomial probe budgets
# ---------------------------------------------------------------------------

def poly_regime_limit(N_list: Iterable[int], poly_exponent: int) -> list[tuple[int, float]]:
    """Closed-form information (bits) for q = N**exponent probes on 2**N pages."""
    if poly_exponent < 1:
        raise DomainError("exponent must be at least 1")
    out = []
    for N in N_list:
        n, q = 1 << N, N ** poly_exponent
        if q >= n:
            raise DomainError(f"q = {N}**{poly_exponent} reaches n = 2**{N}")
        out.append((N, closed_form_sum(n, q) / LN2))
    return out
