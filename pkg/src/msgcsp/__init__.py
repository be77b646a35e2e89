"""Message-passing executions and constraint satisfaction, both directions.

Simulate evidence-carrying protocols, compile their traces into constraint
systems, realize constraint systems as certificate-exchange protocols, and
analyse the orders (happens-before, Lamport clocks, pomsets) traces induce.
"""

from .core import (
    Commitment,
    Constraint,
    ConstraintSystem,
    Event,
    EventKind,
    Pomset,
    PrecedenceRelation,
    Trace,
    Valuation,
    assign_lamport_clocks,
    build_pomset,
    count_linear_extensions,
    derive_happens_before,
    is_symmetric,
    transitive_closure,
    validate_partial_order,
)
from .realizer import Certificate, realize, terminal_outcome_set, verify_certificate
from .reflink import LinkConfig, link_outcome_constraint, run_link_exchange, step_link
from .simulator import Acceptance, Action, Scenario, enumerate_outcomes, load_scenario, run_scenario
from .solver import check_valuation, solve_bruteforce, solve_search
from .trace2csp import compile_trace, narrow_domains

__version__ = "0.1.0"

__all__ = [
    "Acceptance", "Action", "Certificate", "Commitment", "Constraint", "ConstraintSystem",
    "Event", "EventKind", "LinkConfig", "Pomset", "PrecedenceRelation", "Scenario", "Trace",
    "Valuation", "assign_lamport_clocks", "build_pomset", "check_valuation", "compile_trace",
    "count_linear_extensions", "derive_happens_before", "enumerate_outcomes", "is_symmetric",
    "link_outcome_constraint", "load_scenario", "narrow_domains", "realize", "run_link_exchange",
    "run_scenario", "solve_bruteforce", "solve_search", "step_link", "terminal_outcome_set",
    "transitive_closure", "validate_partial_order", "verify_certificate",
]
