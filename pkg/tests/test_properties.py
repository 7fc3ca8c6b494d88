"""Property tests over generated histories and response sets"""

import random
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.checkers import (
    ConsistencyChecker,
    Level,
    SearchBudget,
    check_linearizable,
    check_linearizable_naive,
)
from linsmr.history import build_history, extend_timelines, project_object
from linsmr.specs import get_bundle
from linsmr.suites import random_deltas, random_history, two_object_history
from linsmr.voting import ResponseSet, vote

SPECS = ("register", "counter", "fifo-queue", "lock-object")
BUDGET = SearchBudget(max_ops=10, max_nodes=200_000)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def history_for(seed, spec_name, n_ops):
    return random_history(random.Random(seed), spec_name, n_ops)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, spec_name=st.sampled_from(SPECS), n_ops=st.integers(1, 5), level=st.sampled_from(
    [Level.LINEARIZABILITY, Level.MP, Level.INTERVAL]
))
def test_extension_keeps_acceptance(seed, spec_name, n_ops, level):
    checker = ConsistencyChecker(get_bundle(spec_name), BUDGET)
    h = history_for(seed, spec_name, n_ops)
    if not checker.check(h, level).accepted:
        return
    wider = extend_timelines(h, random_deltas(random.Random(seed + 1), h))
    assert checker.check(wider, level).accepted


@settings(max_examples=60, deadline=None)
@given(seed=seeds, spec_name=st.sampled_from(SPECS), n_ops=st.integers(1, 6))
def test_search_matches_oracle(seed, spec_name, n_ops):
    spec = get_bundle(spec_name).sequential
    h = history_for(seed, spec_name, n_ops)
    assert check_linearizable(h, spec, BUDGET).accepted == check_linearizable_naive(h, spec).accepted


@settings(max_examples=40, deadline=None)
@given(
    placement=st.lists(st.sampled_from(["x", "y"]), min_size=1, max_size=5),
    seed=seeds,
)
def test_projection_is_idempotent(placement, seed):
    rng = random.Random(seed)
    spans = []
    for _ in placement:
        start = rng.randint(0, 8)
        spans.append((start, start + rng.randint(1, 3)))
    calls = [("read", (), 0)] * len(placement)
    h = two_object_history(placement, calls, spans)
    for obj in ("x", "y"):
        once = project_object(h, obj)
        assert project_object(once, obj) == once
        assert all(op.object == obj for op in once.operations())


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n_ops=st.integers(1, 6))
def test_event_order_does_not_matter(seed, n_ops):
    h = history_for(seed, "register", n_ops)
    shuffled = list(h.events)
    random.Random(seed).shuffle(shuffled)
    assert build_history(shuffled) == h


@settings(max_examples=80, deadline=None)
@given(
    values=st.lists(st.integers(0, 2), min_size=1, max_size=4),
    f=st.integers(0, 1),
    seed=seeds,
)
def test_vote_ignores_insertion_order(values, f, seed):
    """Only arrival times decide, not the order responses were recorded in."""
    entries = [(replica, value, replica) for replica, value in enumerate(values)]
    shuffled = list(entries)
    random.Random(seed).shuffle(shuffled)
    first, second = ResponseSet("r"), ResponseSet("r")
    for entry in entries:
        first.add(*entry)
    for entry in shuffled:
        second.add(*entry)
    assert repr(vote(first, f)) == repr(vote(second, f))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
