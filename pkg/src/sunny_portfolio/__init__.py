"""SUNNY: lazy k-nearest-neighbour solver-portfolio scheduling."""

from ._kernels import BACKEND
from .core import (
    Neighborhood,
    Schedule,
    SubPortfolio,
    SunnyConfig,
    SunnyIndex,
    build_schedule,
    max_solved,
    nearest_neighbors,
    select_subportfolio,
)
from .evaluation import (
    EvaluationReport,
    FoldPlan,
    PortfolioSpec,
    SimulationOutcome,
    compose_portfolio,
    elect_backup,
    make_folds,
    run_baseline,
    run_sunny_eval,
    simulate_schedule,
    sweep_k,
)
from .kb import (
    KnowledgeBase,
    KnowledgeBaseError,
    ScalingParams,
    apply_scaling,
    fit_scaling,
    load_knowledge_base,
)
from .runner import ExecutionTrace, SolverCommand, execute_schedule

__version__ = "0.1.0"
