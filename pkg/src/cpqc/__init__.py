"""Conditional parameterized quantum circuits for option pricing.

Train a parameterized quantum circuit to approximate a payoff function,
transform it into a conditional circuit that evaluates the
distribution-weighted expectation in one shot, and compare its gate cost
against a quantum-arithmetic baseline.
"""

from .backend import HAS_NUMBA, backend_name
from .circuit import Block, Circuit, CircuitParseError, deserialize, serialize
from .sim import (
    GateOp,
    Observable,
    Statevector,
    apply_controlled,
    apply_gate,
    expectation,
    inject_amplitudes,
)
from .training import (
    Problem,
    TrainConfig,
    TrainResult,
    cost,
    finite_difference_gradient,
    gradient,
    optimize,
    quantum_model,
)
from .search import (
    BlockPool,
    GeneticConfig,
    GeneticResult,
    SearchConfig,
    SearchResult,
    default_pool,
    genetic_learn,
    initial_circuit,
    layered_circuit,
    lineage_csv,
    structure_learn,
)
from .conditional import (
    ConditionalCircuit,
    ControlLayout,
    ProductDistribution,
    PropositionReport,
    conditional_expectation,
    grid_features,
    loader_gates,
    make_conditional,
    serialize_conditional,
    trivial_conditional,
    verify_proposition,
)
from .arithmetic import (
    ArithmeticCircuit,
    build_basket,
    build_vanilla,
    closed_form_probability,
    invert_probability,
)
from .finance import (
    ArithmeticBackend,
    CpqcBackend,
    ExactBackend,
    LabelScale,
    MarketModel,
    PayoffSpec,
    PriceGrid,
    PriceResult,
    build_arithmetic_circuit,
    build_training_problem,
    discretize,
    integer_weights,
    payoff,
    price,
)
from .transpile import ResourceReport, decompose, depth_of, report, scaling_sweep
from .fixtures import fixture_grid_step, fixture_names, load_fixture
from .config import ConfigError, RunConfig, load_config

__all__ = [
    "HAS_NUMBA",
    "backend_name",
    "Block",
    "Circuit",
    "CircuitParseError",
    "serialize",
    "deserialize",
    "GateOp",
    "Observable",
    "Statevector",
    "apply_controlled",
    "apply_gate",
    "expectation",
    "inject_amplitudes",
    "Problem",
    "TrainConfig",
    "TrainResult",
    "cost",
    "gradient",
    "finite_difference_gradient",
    "optimize",
    "quantum_model",
    "BlockPool",
    "SearchConfig",
    "GeneticConfig",
    "SearchResult",
    "GeneticResult",
    "default_pool",
    "structure_learn",
    "genetic_learn",
    "initial_circuit",
    "layered_circuit",
    "lineage_csv",
    "ControlLayout",
    "ConditionalCircuit",
    "ProductDistribution",
    "PropositionReport",
    "make_conditional",
    "trivial_conditional",
    "conditional_expectation",
    "grid_features",
    "loader_gates",
    "serialize_conditional",
    "verify_proposition",
    "ArithmeticCircuit",
    "build_vanilla",
    "build_basket",
    "closed_form_probability",
    "invert_probability",
    "PayoffSpec",
    "PriceGrid",
    "MarketModel",
    "LabelScale",
    "ExactBackend",
    "CpqcBackend",
    "ArithmeticBackend",
    "PriceResult",
    "payoff",
    "discretize",
    "build_training_problem",
    "build_arithmetic_circuit",
    "integer_weights",
    "price",
    "ResourceReport",
    "decompose",
    "depth_of",
    "report",
    "scaling_sweep",
    "fixture_names",
    "load_fixture",
    "fixture_grid_step",
    "ConfigError",
    "RunConfig",
    "load_config",
]

__version__ = "0.1.0"
