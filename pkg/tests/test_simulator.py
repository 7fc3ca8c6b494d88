"""Tests for the SMR simulator"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.checkers import check_schneider_properties
from linsmr.errors import ConfigInvalid, OutOfSpecRun
from linsmr.scenarios import (
    listing1_object,
    register_object,
    register_workload,
    run_byzantine,
    run_duplicate_ids,
    run_listing1,
)
from linsmr.scheduler import SchedulerKind
from linsmr.simulator import (
    Behavior,
    ClientRequest,
    FailureModel,
    Fault,
    Ordering,
    SimConfig,
    byzantine_client_duplicate_ids,
    corrupt,
    run_smr,
)


def test_listing1_timeline():
    """Issue at 0; E is decided at 6 and D at 7."""
    out = run_listing1(0)
    assert out.decided == {"D": "ok", "E": 2}
    spans = out.client_history.spans()
    assert (spans["E"].invocation_time, spans["E"].response_time) == (0, 6)
    assert (spans["D"].invocation_time, spans["D"].response_time) == (0, 7)
    assert out.sequence == ("D", "E")


def test_listing1_seed_and_scheduler():
    assert run_listing1(1).decided["E"] == 1
    assert run_listing1(0, SchedulerKind.SEQUENTIAL).decided["E"] == 4


def test_replicas_agree():
    out = run_listing1(0)
    assert set(out.delivery_order.values()) == {("D", "E")}
    assert all(state == {"sharedVar": 4} for state in out.replica_states.values())
    assert {rid: set(table) for rid, table in out.responses.items()} == {
        "D": {0, 1, 2},
        "E": {0, 1, 2},
    }
    assert check_schneider_properties(out) == (True, True)


def test_runs_are_reproducible():
    assert run_listing1(3) == run_listing1(3)


def test_inner_history_spans_execution():
    inner = run_listing1(0).inner_histories[0]
    spans = inner.spans()
    assert spans["D"].invocation_time == 3
    assert spans["E"].response_time == 5


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n": 2, "f": 1},
        {"n": 3, "f": 1, "failure_model": FailureModel.BYZANTINE},
        {"n": 3, "f": 1, "fault_plan": (Fault(replica=5),)},
        {"n": 3, "f": 1, "fault_plan": (Fault(replica=0, behavior=Behavior.FLIP),)},
        {"n": 3, "f": 1, "fault_plan": (Fault(replica=0), Fault(replica=0, time=2))},
        {"n": 3, "f": 1, "ordering": Ordering.PARTIAL},
        {"n": 3, "f": 1, "replica_slowdown": {1: 0}},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigInvalid):
        SimConfig(**kwargs)


def test_config_load_wraps_type_errors():
    with pytest.raises(ConfigInvalid):
        SimConfig.load({"n": "three"})
    assert SimConfig.load({"n": 5, "f": 2}).vote_threshold("c1") == 0


def test_partial_order_with_sequential_scheduler():
    cfg = SimConfig(n=3, f=1, ordering=Ordering.PARTIAL, scheduler=SchedulerKind.SEQUENTIAL, conflicts=())
    out = run_smr(cfg, register_workload(), register_object())
    assert set(out.decided) == {"w1", "r1", "w2", "r2"}


def test_slow_replica_is_not_held_to_client_spans():
    """A slow replica finishes after the client decided, so it never decides."""
    cfg = SimConfig(n=3, f=1, replica_slowdown={0: 3})
    out = run_smr(cfg, register_workload(), register_object())
    assert 0 in out.correct_replicas
    assert all(0 not in replicas for replicas in out.deciders.values())
    outer = out.client_history.spans()
    slow = out.inner_histories[0].spans()
    assert slow["w1"].response_time > outer["w1"].response_time
    assert out.containment_violations() == []


@pytest.mark.parametrize("seed", range(4))
def test_deciding_replicas_run_inside_client_spans(seed):
    for out in (run_listing1(seed), run_byzantine(seed), run_byzantine(seed, Behavior.DROP)):
        assert set(out.deciders) == set(out.decided)
        assert out.containment_violations() == []


def test_byzantine_deciders_are_a_matching_quorum():
    out = run_byzantine(0, Behavior.FLIP)
    for rid, replicas in out.deciders.items():
        assert len(replicas) == 2
        assert 3 not in replicas
        assert len({repr(out.responses[rid][r]) for r in replicas}) == 1


@pytest.mark.parametrize("seed", range(10))
def test_a_crash_at_any_time_still_completes_every_request(seed):
    workload = register_workload()
    for replica in range(3):
        for time in range(12):
            cfg = SimConfig(n=3, f=1, seed=seed, fault_plan=(Fault(replica=replica, time=time),))
            out = run_smr(cfg, workload, register_object())
            assert set(out.decided) == {"w1", "r1", "w2", "r2"}, (replica, time)
            assert out.decided["r2"] == 2
            assert out.containment_violations() == []


def _same_batch_workload():
    return [
        ClientRequest(request_id="w1", client="c1", op_name="write", args=(1,)),
        ClientRequest(request_id="r1", client="c2", op_name="read"),
        ClientRequest(request_id="r2", client="c3", op_name="read"),
        ClientRequest(request_id="r3", client="c4", op_name="read"),
        ClientRequest(request_id="w2", client="c1", op_name="write", args=(2,), issue_time=4),
        ClientRequest(request_id="r4", client="c2", op_name="read", issue_time=4),
        ClientRequest(request_id="r5", client="c3", op_name="read", issue_time=4),
    ]


def test_partial_order_keeps_conflicting_pairs_and_final_state():
    conflicts = (("write", "write"), ("write", "read"))
    workload = _same_batch_workload()
    names = {r.request_id: r.op_name for r in workload}
    reordered = 0
    for seed in range(40):
        cfg = SimConfig(
            n=3,
            f=1,
            seed=seed,
            ordering=Ordering.PARTIAL,
            scheduler=SchedulerKind.SEQUENTIAL,
            conflicts=conflicts,
        )
        out = run_smr(cfg, workload, register_object())
        assert set(out.decided) == set(names)
        orders = list(out.delivery_order.values())
        if len(set(orders)) > 1:
            reordered += 1
        states = list(out.replica_states.values())
        assert all(state == states[0] for state in states)
        for a in names:
            for b in names:
                if a < b and cfg.conflicting(names[a], names[b]):
                    before = {order.index(a) < order.index(b) for order in orders}
                    assert len(before) == 1, (seed, a, b)
    assert reordered > 0


def test_too_many_faults_is_out_of_spec():
    cfg = SimConfig(n=3, f=1, fault_plan=(Fault(replica=0), Fault(replica=1)))
    with pytest.raises(OutOfSpecRun):
        run_smr(cfg, register_workload(), register_object())


def test_out_of_spec_run_when_allowed():
    cfg = SimConfig(n=3, f=1, fault_plan=(Fault(replica=0), Fault(replica=1)), out_of_spec=True)
    out = run_smr(cfg, register_workload(), register_object())
    assert out.correct_replicas == (2,)
    assert out.decided["r2"] == 2


def test_workload_validation():
    cfg = SimConfig()
    with pytest.raises(ConfigInvalid):
        run_smr(cfg, [ClientRequest(request_id="x", client="c", op_name="cas")], register_object())
    with pytest.raises(ConfigInvalid):
        run_smr(cfg, [ClientRequest(request_id="d", client="c", op_name="D", args=(1,))], listing1_object())
    with pytest.raises(ConfigInvalid):
        run_smr(
            cfg,
            [ClientRequest(request_id="r", client="c", op_name="read", after=("ghost",))],
            register_object(),
        )


def test_byzantine_flip_is_outvoted():
    out = run_byzantine(0, Behavior.FLIP)
    assert out.decided["w1"] == "ok"
    assert out.decided["r2"] == 2
    assert out.responses["r2"][3] != out.responses["r2"][0]
    assert out.correct_replicas == (0, 1, 2)


def test_byzantine_drop_sends_nothing():
    out = run_byzantine(0, Behavior.DROP)
    assert all(3 not in table for table in out.responses.values())
    assert out.decided["r2"] == 2


def test_corrupt_values():
    assert corrupt(Behavior.FLIP, 1) == 0
    assert corrupt(Behavior.FLIP, True) is False
    assert corrupt(Behavior.FLIP, "ok") == "ko~"
    assert corrupt(Behavior.WRONG_VALUE, 7) == -1


def test_duplicate_ids_keep_first_instance():
    out = run_duplicate_ids(0)
    assert out.dropped_duplicates == ("w1",)
    assert out.sequence == ("w1", "r1")
    assert out.decided["r1"] == 1
    assert out.issue_order["mallory"] == ("w1",)


def test_duplicate_ids_need_byzantine_model():
    workload = [ClientRequest(request_id="w1", client="m", op_name="write", args=(1,))]
    with pytest.raises(ConfigInvalid):
        byzantine_client_duplicate_ids(SimConfig(), workload, register_object())


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
