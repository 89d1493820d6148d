import pytest
from hypothesis import given, strategies as st

from psocid.errors import DomainError, ProtocolViolation
from psocid.model import (
    Certificate,
    Instance,
    ProbeRecord,
    Transcript,
    Verdict,
    eq_probe,
    honest_certificate,
    run_search,
    verification_rounds,
    verify_certificate,
)
from psocid.rng import generator
from psocid.strategies import Schedule, ScheduleKind

KEY = bytes(range(32))


def test_lexicographic_example():
    inst = Instance(2, 2, key=KEY)
    res = run_search(inst, Schedule("lex", 4), p=1, max_rounds=4)
    assert res.transcript.outcomes == [0, 0, 1]
    assert res.t_search == 3 and res.winning_searcher == 1
    assert res.q == 3 == res.q_rounds


def test_parallel_round_is_cut_at_hit():
    inst = Instance(3, 5, key=KEY)
    res = run_search(inst, Schedule("lex", 8), p=4, max_rounds=2)
    assert res.t_search == 2 and res.winning_searcher == 2
    assert res.q == 6
    assert res.q_rounds == 8
    assert [(r.t, r.j) for r in res.transcript] == [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2)]


def test_partial_final_round():
    inst = Instance(2, 3, key=KEY)
    res = run_search(inst, Schedule("lex", 4), p=3, max_rounds=5)
    assert res.t_search == 2 and res.winning_searcher == 1


def test_not_found_within_budget():
    inst = Instance(4, 15, key=KEY)
    res = run_search(inst, Schedule("lex", 16), p=2, max_rounds=3)
    assert not res.found and res.t_search is None
    assert res.transcript.outcomes == [0] * 6 and res.transcript.hit is None


def test_exhausted_schedule_is_a_protocol_violation():
    sched = Schedule("lex", 4)
    run_search(Instance(2, 3, key=KEY), sched, 4, 1)
    with pytest.raises(ProtocolViolation):
        sched.next_batch([], 1)


@pytest.mark.parametrize("bad", [(0, 0), (2, 4), (2, -1)])
def test_instance_validation(bad):
    with pytest.raises(DomainError):
        Instance(*bad, key=KEY)


def test_eq_probe_range():
    inst = Instance(3, 1, key=KEY)
    assert eq_probe(inst, 1) == 1 and eq_probe(inst, 0) == 0
    with pytest.raises(DomainError):
        eq_probe(inst, 8)


def test_transcript_rejects_records_after_hit():
    with pytest.raises(DomainError):
        Transcript((ProbeRecord(1, 1, 0, 1), ProbeRecord(1, 2, 1, 0)))


def test_transcript_sorts_and_roundtrips():
    recs = (ProbeRecord(2, 1, 3, 1), ProbeRecord(1, 2, 1, 0), ProbeRecord(1, 1, 0, 0))
    tr = Transcript(recs)
    assert tr.candidates == [0, 1, 3]
    text = '{"metadata": {"seed": 0}}\n' + tr.to_jsonl()
    assert Transcript.from_jsonl(text) == tr
    assert tr.prefix(2).hit is None and tr.hit.candidate == 3


def test_large_bit_length_instance():
    inst = Instance.random(200, generator(1))
    assert 0 <= inst.w_star < inst.n
    assert len(inst.format_index(inst.w_star)) == 200


def test_certificate_verdicts():
    inst = Instance(8, 77, key=KEY)
    tok = inst.mark_token()
    assert verify_certificate(inst, Certificate(77, tok)) is Verdict.ACCEPT
    assert verify_certificate(inst, Certificate(78, tok)) is Verdict.REJECT_INDEX
    assert verify_certificate(inst, Certificate(77, bytes(32))) is Verdict.REJECT_TOKEN
    assert verify_certificate(inst, Certificate(77, tok[:-1])) is Verdict.MALFORMED


def test_token_depends_on_key():
    a, b = Instance(8, 1, key=KEY), Instance(8, 1, key=bytes(32))
    assert a.mark_token() != b.mark_token()
    assert verify_certificate(b, honest_certificate(a)) is Verdict.REJECT_TOKEN


def test_honest_certificate_requires_success():
    inst = Instance(3, 7, key=KEY)
    res = run_search(inst, Schedule("lex", 8), 1, 2)
    with pytest.raises(DomainError):
        honest_certificate(inst, res)


@pytest.mark.parametrize("N,p,rounds", [(1, 1, 1), (20, 1, 20), (20, 7, 3), (20, 400, 1), (64, 64, 1)])
def test_verification_rounds(N, p, rounds):
    assert verification_rounds(N, p) == rounds


@given(
    bits=st.integers(1, 10),
    p=st.integers(1, 40),
    kind=st.sampled_from([ScheduleKind.LEXICOGRAPHIC, ScheduleKind.RANDOM_WITHOUT_REPLACEMENT]),
    seed=st.integers(0, 2 ** 32),
    data=st.data(),
)
def test_search_invariants(bits, p, kind, seed, data):
    n = 1 << bits
    w = data.draw(st.integers(0, n - 1))
    inst = Instance(bits, w, key=KEY)
    sched = Schedule(kind, n, seed)
    res = run_search(inst, sched, p, -(-n // p))
    assert res.found and res.hit_candidate == w
    tr = res.transcript
    # exactly one hit, the final record; no candidate repeats
    assert tr.outcomes.count(1) == 1 and tr.outcomes[-1] == 1
    assert len(set(tr.candidates)) == len(tr)
    assert res.q == Schedule(kind, n, seed).position_of(w)
    assert res.q <= res.q_rounds < res.q + p
    assert verify_certificate(inst, honest_certificate(inst, res)).accepted
