"""Synthesis of formally verified Lyapunov certificates.

Candidate functions are small bias-free networks with polynomial
activations, trained on samples and verified exactly over the dense domain
with SMT queries over nonlinear real arithmetic, in a counterexample-guided
loop.
"""

from .cegis import (
    CegisConfig,
    CegisOutcome,
    ConfigError,
    derive_seed,
    initial_sampling,
    run_cegis,
)
from .dynamics import (
    Benchmark,
    DomainSpec,
    EquilibriumError,
    SystemFormatError,
    VectorField,
    benchmark_ids,
    get_benchmark,
    load_system,
    parse_system,
)
from .learner import (
    LearnerConfig,
    SampleSet,
    TrainingOverflowError,
    auto_slope,
    classify_samples,
    leaky_relu,
    sample_loss,
    train,
)
from .network import (
    EvalTrace,
    Lnn,
    NetworkShape,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .poly import ParseError, Polynomial, parse_polynomial
from .translation import (
    CertificateCandidate,
    DegreeCapError,
    expand_network,
    lie_derivative,
    load_certificate,
    make_candidate,
    rationalize_weights,
)
from .verifier import (
    FalsificationQuery,
    QueryResult,
    SolverConfig,
    augment_counterexample,
    build_queries,
    discover_solver,
    emit_smtlib,
    fallback_falsify,
    run_query,
    sample_violations,
    validate_counterexample,
)

__version__ = "0.1.0"

__all__ = [
    "Benchmark",
    "CegisConfig",
    "CegisOutcome",
    "CertificateCandidate",
    "ConfigError",
    "DegreeCapError",
    "DomainSpec",
    "EquilibriumError",
    "EvalTrace",
    "FalsificationQuery",
    "LearnerConfig",
    "Lnn",
    "NetworkShape",
    "ParseError",
    "Polynomial",
    "QueryResult",
    "SampleSet",
    "SolverConfig",
    "SystemFormatError",
    "TrainingOverflowError",
    "VectorField",
    "auto_slope",
    "augment_counterexample",
    "benchmark_ids",
    "build_queries",
    "classify_samples",
    "derive_seed",
    "discover_solver",
    "emit_smtlib",
    "expand_network",
    "fallback_falsify",
    "get_benchmark",
    "init_network",
    "initial_sampling",
    "leaky_relu",
    "lie_derivative",
    "load_certificate",
    "load_checkpoint",
    "load_system",
    "make_candidate",
    "parse_polynomial",
    "parse_system",
    "rationalize_weights",
    "run_cegis",
    "run_query",
    "sample_loss",
    "sample_violations",
    "save_checkpoint",
    "train",
    "validate_counterexample",
]
