"""robosmc: simulation and statistical model checking for networks of
stochastic hybrid automata, built around an energy-aware robot sorting
cell whose idle policy follows an adaptive arrival predictor.

Layering:

* ``expressions`` - the guard/update/query expression language;
* ``automata``    - network formalism, validation and step semantics;
* ``engine``      - seeded trajectory sampling and trace export;
* ``queries``     - the query grammar and its AST;
* ``smc``         - estimators and monitored-query evaluation;
* ``predictor``   - the 20-arrival windowed policy predictor;
* ``casestudy``   - the sorting-cell models and analytic oracles;
* ``modelfile``   - YAML model/options loading;
* ``cli``         - the ``robosmc`` command.
"""

from .automata import (
    Assignment,
    Edge,
    FunctionUpdate,
    HybridAutomaton,
    Location,
    ModelError,
    Network,
    NetworkState,
    NetworkValidationError,
    UnknownIdentifier,
    Variable,
    apply_move,
    compile_observer,
    elapse,
    enabled_moves,
    initial_state,
    max_delay,
    validate_network,
)
from .casestudy import (
    VERIFICATION_QUERIES,
    EnergyTable,
    EnvSpec,
    NoBreakEven,
    RobotSpec,
    SpecInconsistent,
    aligned_ranges,
    break_even_dwell,
    build_comparison,
    build_environment,
    build_robot,
    build_single,
    idle_cycle_penalty,
)
from .engine import (
    Monitor,
    SimConfig,
    Trace,
    choose_move,
    sample_delay,
    simulate_run,
    trace_to_csv,
    trace_to_json,
    trial_rng,
)
from .expressions import ParseError, parse_expression
from .modelfile import load_model, load_options, parse_model, resolve_model
from .predictor import (
    ArrivalWindow,
    Decision,
    Thresholds,
    branch_weights,
    interval_of,
    make_window,
    record_arrival,
    replay,
)
from .queries import (
    Always,
    Exists,
    ExpectedValue,
    LeadsTo,
    NoDeadlock,
    Probability,
    Query,
    load_queries,
    parse_query,
)
from .smc import (
    SmcResult,
    check_monitored,
    chernoff_runs,
    clopper_pearson,
    estimate_expectation,
    estimate_probability,
    evaluate_queries,
)

__version__ = "0.1.0"

__all__ = [
    "Always",
    "ArrivalWindow",
    "Assignment",
    "Decision",
    "Edge",
    "EnergyTable",
    "EnvSpec",
    "Exists",
    "ExpectedValue",
    "FunctionUpdate",
    "HybridAutomaton",
    "LeadsTo",
    "Location",
    "ModelError",
    "Monitor",
    "Network",
    "NetworkState",
    "NetworkValidationError",
    "NoBreakEven",
    "NoDeadlock",
    "ParseError",
    "Probability",
    "Query",
    "RobotSpec",
    "SimConfig",
    "SmcResult",
    "SpecInconsistent",
    "Thresholds",
    "Trace",
    "UnknownIdentifier",
    "Variable",
    "VERIFICATION_QUERIES",
    "apply_move",
    "branch_weights",
    "aligned_ranges",
    "break_even_dwell",
    "build_comparison",
    "build_environment",
    "build_robot",
    "build_single",
    "check_monitored",
    "chernoff_runs",
    "choose_move",
    "clopper_pearson",
    "compile_observer",
    "elapse",
    "enabled_moves",
    "estimate_expectation",
    "estimate_probability",
    "evaluate_queries",
    "idle_cycle_penalty",
    "initial_state",
    "interval_of",
    "load_model",
    "load_options",
    "load_queries",
    "make_window",
    "max_delay",
    "parse_expression",
    "parse_model",
    "parse_query",
    "record_arrival",
    "replay",
    "resolve_model",
    "sample_delay",
    "simulate_run",
    "trace_to_csv",
    "trace_to_json",
    "trial_rng",
    "validate_network",
    "__version__",
]
