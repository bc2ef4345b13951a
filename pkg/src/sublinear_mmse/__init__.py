"""Minimum mean square estimation under sublinear expectations on finite spaces."""

__version__ = "0.1.0"

from .space import (  # noqa: E402
    ConditioningWarning,
    Measure,
    Partition,
    SampleSpace,
    as_variable,
    check_equivalence,
    cond_density,
    cond_expectation,
    expectation,
)
from .ambiguity import (  # noqa: E402
    AmbiguitySet,
    StabilityReport,
    g_transform,
    hull_residual,
    mix,
    pasting_construct,
    rho,
    rho_residual_sq,
    stability_check,
)
from .solver import (  # noqa: E402
    EstimatorSolution,
    gradient_G,
    objective_G,
    solve_mmse,
    uniqueness_probe,
    verify_saddle,
)
from .scenarios import (  # noqa: E402
    Scenario,
    backward_recursion,
    conditional_sublinear,
    example_41,
    example_42_truncated,
    example_43_tree,
    load_scenario,
    save_report,
    save_scenario,
)
