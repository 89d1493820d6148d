"""Equality-probe search laboratory.

Simulates the two-stage search/verification protocol over a library of
``2**N`` pages with one marked page, and computes the information
quantities that bound how fast any prober can locate it.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    DomainError,
    ProtocolViolation,
    PsocidError,
    ScriptError,
    UnsupportedError,
)
from .model import (
    Certificate,
    Instance,
    ProbeRecord,
    SearchResult,
    Transcript,
    Verdict,
    eq_probe,
    run_search,
    verification_rounds,
    verify_certificate,
)
from .strategies import Schedule, ScheduleKind, next_batch
from .info import (
    BoundReport,
    LogBase,
    RecoveryMode,
    binary_entropy,
    bound_report,
    brute_force_mi,
    chain_rule_bound,
    exact_transcript_mi,
    fano_posterior_bound,
    fano_required_info,
    min_probes_for_recovery,
    per_probe_entropy,
    poly_probe_info,
)
