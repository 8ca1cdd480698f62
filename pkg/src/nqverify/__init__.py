"""Certifying verifier for nondeterministic quantum while-programs."""

from .errors import InputError, InternalError, InvalidInvariant, VerifierError
from .operators import (
    Assertion,
    DensityOperator,
    LabeledOperator,
    ProjectiveMeasurement,
    QuantumPredicate,
    SuperOperator,
    adjoint,
    apply,
    compose,
    eig_hermitian,
    extend,
    partial_trace,
    tensor,
)
from .order import OrderDecision, inf_le, loewner_le, prune
from .semantics import check_formula_empirical, denote_bounded, denote_loopfree, expectation
from .syntax import builtins, parse, parse_program, pretty, typecheck
from .verifier import Options, run_corpus, verify, verify_source
from .wlp import check_invariant, wlp, wp_loopfree

__version__ = "0.1.0"
