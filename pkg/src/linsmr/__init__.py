"""linsmr - linearizability hierarchy checkers and an SMR simulator"""

from .checkers import (
    ConsistencyChecker,
    HierarchyReport,
    Level,
    SearchBudget,
    check_hierarchy,
    check_interval_linearizable,
    check_linearizable,
    check_mp_linearizable,
    check_schneider_properties,
    check_set_linearizable,
)
from .cli import app, main
from .history import (
    UNOBSERVED,
    CompletionPolicy,
    EventRecord,
    History,
    Operation,
    build_history,
    complete_history,
    extend_timelines,
    project_object,
    real_time_precedes,
)
from .program import compile_object, compile_program
from .quorum import run_quorum_register
from .scenarios import run_conditional_wait_scenario, run_nested_scenario
from .simulator import SimConfig, SimOutput, byzantine_client_duplicate_ids, run_smr
from .specs import SpecBundle, Verdict, get_bundle, get_spec, list_available_specs
from .tracing import TracedChecker, setup_tracing
from .voting import assemble_outer_history, vote

__version__ = "0.1.0"

__all__ = [
    "ConsistencyChecker",
    "HierarchyReport",
    "Level",
    "SearchBudget",
    "check_hierarchy",
    "check_interval_linearizable",
    "check_linearizable",
    "check_mp_linearizable",
    "check_schneider_properties",
    "check_set_linearizable",
    "app",
    "main",
    "UNOBSERVED",
    "CompletionPolicy",
    "EventRecord",
    "History",
    "Operation",
    "build_history",
    "complete_history",
    "extend_timelines",
    "project_object",
    "real_time_precedes",
    "compile_object",
    "compile_program",
    "run_quorum_register",
    "run_conditional_wait_scenario",
    "run_nested_scenario",
    "SimConfig",
    "SimOutput",
    "byzantine_client_duplicate_ids",
    "run_smr",
    "SpecBundle",
    "Verdict",
    "get_bundle",
    "get_spec",
    "list_available_specs",
    "TracedChecker",
    "setup_tracing",
    "assemble_outer_history",
    "vote",
]
