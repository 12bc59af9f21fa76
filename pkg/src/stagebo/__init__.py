"""Multi-objective Bayesian optimization by sequential gap targeting.

The optimizer fills the largest geometric gap of the (sampled) Pareto front
each iteration by turning the gap center's coordinates into epsilon
constraints and maximizing constrained expected improvement. Unconstrained,
externally constrained and preference-box variants share the same loop.
"""

from .acquisition import (
    EpsilonSubproblem,
    cei,
    expected_improvement,
    maximize_cei,
    probability_of_feasibility,
)
from .evo import Population, crowding_distance, non_dominated_sort, nsga2
from .exceptions import (
    AlignmentError,
    ConfigError,
    DataError,
    DomainError,
    FrontUnavailableError,
    NumericalError,
    StageBoError,
)
from .harness import RunConfig, RunRecord, execute, export, reference_front, run, summarize
from .metrics import (
    ParetoArchive,
    feasible_ratio,
    fill_distance,
    hypervolume,
    igd,
    igd_plus,
    pareto_filter,
)
from .problems import (
    ProblemSpec,
    ReferenceFront,
    catalog,
    evaluate,
    get_problem,
    register_problem,
    true_front,
)
from .stage import (
    Dataset,
    LoopState,
    SampledFront,
    StageConfig,
    build_subproblem,
    initialize,
    sampled_front,
    select_objective,
    select_target,
    step,
)
from .surrogate import (
    GpModel,
    SampledPath,
    build_model,
    fit,
    log_marginal_likelihood,
    posterior,
    sample_path,
)

__version__ = "0.1.0"
