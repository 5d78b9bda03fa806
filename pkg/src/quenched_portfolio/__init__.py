"""Extremal portfolios under budget and risk constraints, with large-N moment predictions."""
from .closed_form import (
    FrontierCurve,
    GeometryStats,
    PortfolioSolution,
    closed_form_statistics,
    frontier,
    geometry_statistics,
    solve_portfolio,
)
from .errors import (
    AsymptoticRegimeError,
    ConfigError,
    DegenerateReturnsError,
    InfeasibleRiskError,
    InternalError,
    OracleDivergenceError,
    PortfolioError,
    RegularityError,
    SingularMatrixError,
)
from .experiments import (
    AssetFamily,
    ConvergenceReport,
    SweepConfig,
    feasible_sampler,
    numeric_max_return_oracle,
    run_convergence,
)
from .model import (
    AssetParameters,
    ReturnSample,
    RiskMatrix,
    build_risk_matrix,
    generate_returns,
    risk_from_matrix,
)
from .moments import MomentSet, compute_moments
from .replica import (
    QuenchedAverages,
    ReplicaPrediction,
    quenched_averages,
    replica_moments,
    replica_order_parameters,
    replica_phi,
    replica_prediction,
)

__version__ = "0.1.0"
