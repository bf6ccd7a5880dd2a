"""circnet: circularity and flow indicators for mass-flow networks.

A network of material stocks and transfers is represented by a square
nonnegative matrix (stocks on the diagonal in kg, flow rates off the
diagonal in kg/s) and its weighted digraph.  The package enumerates the
digraph's elementary cycles, computes the cycle-based circularity
indicators and the auxiliary stock/flow aggregates, tracks them over
time for expression-valued entries, verifies or imposes the mass
balance by integrating the stock ODEs, and propagates entry
uncertainty by seeded Monte Carlo sampling.
"""

from ._kernels import BACKEND, NUMBA_ENABLED
from .cycles import (
    CycleAnalysis,
    CycleBudgetExceededError,
    TooLargeForOracleError,
    brute_force_cycles,
    build_digraph,
    enumerate_cycles,
)
from .dynamics import (
    BalanceResult,
    BalanceVerdict,
    GridMismatchError,
    NegativeStockEvent,
    TimeGrid,
    TopologyChange,
    TopologyTimeline,
    corrected_indicator_trajectory,
    detect_topology_changes,
    impose_mass_balance,
    indicator_trajectory,
    verify_mass_balance,
)
from .indicators import (
    CycleMeans,
    NonPositiveFlowError,
    compute_report,
    cycle_am,
    cycle_dependent_indicators,
    cycle_gm,
    cycle_hm,
    cycle_independent_indicators,
    cycle_means,
)
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    Arc,
    Constant,
    DirectedCycle,
    Distribution,
    DistributionEntryPresentError,
    EmptyMatrixError,
    Expression,
    ExpressionDomainError,
    FlowEntry,
    IndicatorReport,
    MassFlowDigraph,
    MassFlowMatrix,
    ModelError,
    NegativeEntryError,
    NetworkSpec,
    NonSquareError,
    SpecError,
    Tabulated,
    TimeWindow,
    network_to_matrix,
    validate_matrix,
)
from .stochastic import (
    EnsembleStat,
    StochasticReport,
    TimeRequiredError,
    UnsupportedDistributionError,
    draw_sample,
    draw_samples,
    sample_mean_matrix,
    stochastic_indicators,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "Arc",
    "BalanceResult",
    "BalanceVerdict",
    "Constant",
    "CycleAnalysis",
    "CycleBudgetExceededError",
    "CycleMeans",
    "DEFAULT_EPS_FLOW",
    "DEFAULT_MAX_CYCLES",
    "DirectedCycle",
    "Distribution",
    "DistributionEntryPresentError",
    "EmptyMatrixError",
    "EnsembleStat",
    "Expression",
    "ExpressionDomainError",
    "FlowEntry",
    "GridMismatchError",
    "IndicatorReport",
    "MassFlowDigraph",
    "MassFlowMatrix",
    "ModelError",
    "NegativeEntryError",
    "NegativeStockEvent",
    "NetworkSpec",
    "NonPositiveFlowError",
    "NonSquareError",
    "SpecError",
    "StochasticReport",
    "Tabulated",
    "TimeGrid",
    "TimeRequiredError",
    "TimeWindow",
    "TooLargeForOracleError",
    "TopologyChange",
    "TopologyTimeline",
    "UnsupportedDistributionError",
    "brute_force_cycles",
    "build_digraph",
    "compute_report",
    "corrected_indicator_trajectory",
    "cycle_am",
    "cycle_dependent_indicators",
    "cycle_gm",
    "cycle_hm",
    "cycle_independent_indicators",
    "cycle_means",
    "detect_topology_changes",
    "draw_sample",
    "draw_samples",
    "enumerate_cycles",
    "impose_mass_balance",
    "indicator_trajectory",
    "network_to_matrix",
    "sample_mean_matrix",
    "stochastic_indicators",
    "validate_matrix",
    "verify_mass_balance",
]
