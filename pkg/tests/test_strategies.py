import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from psocid.errors import DomainError, ProtocolViolation, ScriptError, UnsupportedError
from psocid.model import Instance, run_search
from psocid.strategies import (
    Schedule,
    ScheduleKind,
    hit_position_distribution,
    load_script,
    next_batch,
    sample_hit_positions,
)


def test_parse_accepts_values_and_names():
    assert ScheduleKind.parse("lex") is ScheduleKind.LEXICOGRAPHIC
    assert ScheduleKind.parse("random_with_replacement") is ScheduleKind.RANDOM_WITH_REPLACEMENT
    with pytest.raises(DomainError):
        ScheduleKind.parse("spiral")


def test_lexicographic_batches():
    s = Schedule("lex", 10)
    assert next_batch(s, [], 3) == [0, 1, 2]
    assert s.next_batch([], 3) == [3, 4, 5]
    assert s.remaining == 4
    with pytest.raises(ProtocolViolation):
        s.next_batch([], 5)


@given(n=st.integers(1, 300), seed=st.integers(0, 2 ** 63), p=st.integers(1, 17))
def test_without_replacement_covers_library_once(n, seed, p):
    s = Schedule("random", n, seed)
    seen = []
    while s.remaining:
        seen += s.next_batch([], min(p, s.remaining))
    assert sorted(seen) == list(range(n))
    # positions agree with the emitted order
    assert all(s.position_of(c) == i + 1 for i, c in enumerate(seen))


def test_random_schedule_is_seed_deterministic():
    a = Schedule("random", 1000, 5).next_batch([], 50)
    b = Schedule("random", 1000, 5).next_batch([], 50)
    c = Schedule("random", 1000, 6).next_batch([], 50)
    assert a == b != c


def test_with_replacement_allows_repeats():
    s = Schedule("replace", 2, 0)
    draws = s.next_batch([], 64)
    assert set(draws) == {0, 1}
    assert s.remaining is None
    with pytest.raises(UnsupportedError):
        s.position_of(0)


def test_with_replacement_search_terminates_eventually():
    inst = Instance(3, 6, key=bytes(32))
    res = run_search(inst, Schedule("replace", 8, 11), 2, 1000)
    assert res.found and res.hit_candidate == 6


def test_script_list():
    s = Schedule("scripted", 8, script=[7, 3, 5])
    assert s.next_batch([], 2) == [7, 3]
    assert s.position_of(5) == 3 and s.position_of(0) is None
    with pytest.raises(ScriptError):
        s.next_batch([], 2)


@pytest.mark.parametrize("script", [[1, 1], [8], [-1]])
def test_bad_scripts(script):
    with pytest.raises(ScriptError):
        Schedule("scripted", 8, script=script)


def test_script_required_only_for_scripted():
    with pytest.raises(ScriptError):
        Schedule("scripted", 8)
    with pytest.raises(ScriptError):
        Schedule("lex", 8, script=[0])


def test_adaptive_policy_sees_history():
    # binary-flavoured policy: probe odd candidates first, then even ones
    order = [c for c in range(16) if c % 2] + [c for c in range(16) if not c % 2]

    def policy(history, p):
        return order[len(history):len(history) + p]

    inst = Instance(4, 4, key=bytes(32))
    res = run_search(inst, Schedule("scripted", 16, script=policy), 3, 10)
    assert res.hit_candidate == 4 and res.q == 8 + 3


def test_policy_repeat_is_rejected():
    s = Schedule("scripted", 4, script=lambda h, p: [0] * p)
    s.next_batch([], 1)
    with pytest.raises(ScriptError):
        s.next_batch([], 1)


def test_fresh_resets_state():
    s = Schedule("lex", 4)
    s.next_batch([], 4)
    assert s.fresh().next_batch([], 2) == [0, 1]


def test_load_script(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps([3, 1, 2]))
    assert load_script(path) == [3, 1, 2]
    path.write_text(json.dumps({"a": 1}))
    with pytest.raises(ScriptError):
        load_script(path)


def test_hit_positions_are_partition_invariant():
    whole = sample_hit_positions("random", 97, 3, 0, 500)
    parts = np.concatenate([sample_hit_positions("random", 97, 3, a, b) for a, b in [(0, 123), (123, 500)]])
    assert np.array_equal(whole, parts)


@pytest.mark.parametrize("kind", ["lex", "random"])
def test_exhaustive_hit_distribution_is_exactly_uniform(kind):
    h = hit_position_distribution(kind, 64, seed=9, exhaustive=True)
    assert np.all(h.counts == 1) and h.chi2 == 0.0


def test_sampled_hit_distribution_is_uniform():
    h = hit_position_distribution("random", 16, trials=32000, seed=2)
    assert h.trials == 32000
    assert h.p_value > 1e-3


def test_scripted_distribution_requires_full_coverage():
    with pytest.raises(ScriptError):
        hit_position_distribution("scripted", 4, trials=100, seed=1, script=[0, 1])
