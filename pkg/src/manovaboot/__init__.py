"""Wald-type statistics and bootstrap tests for heteroscedastic multivariate factorial designs."""

__version__ = "0.1.0"

from .design import (  # noqa: E402
    Analysis,
    Factor,
    FactorialLayout,
    HypothesisMatrix,
    HypothesisSpec,
    Role,
    between,
    build_hypothesis,
    cell_index,
    layout,
    partition_hypothesis,
    within,
)
from .distributions import ErrorDistribution, RngStream, chi_square_cdf, chi_square_sf  # noqa: E402
from .inference import (  # noqa: E402
    GroupedDataset,
    MomentEstimates,
    TestResult,
    chi2_test,
    estimate_moments,
    npbs_test,
    pbs_test,
    run_tests,
    wald_statistic,
)
from .multiplicity import ClosureDecision, HypothesisFamily, closure  # noqa: E402
from .simulation import SimulationScenario, builtin_scenarios, run_scenario  # noqa: E402
