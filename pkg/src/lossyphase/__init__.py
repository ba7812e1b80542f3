"""Phase estimation with coherent light and squeezed vacuum under photon loss.

``gaussian`` holds the closed forms, ``fock`` the truncated Fock-space oracle,
``estimator`` the explicit optimal estimator and its measurement, and
``sweep``/``cli`` the table-producing front end.
"""
from .gaussian import (
    BudgetSpec,
    InputSpec,
    LossyGaussianState,
    budget_from_input,
    enhancement,
    enhancement_at_optimum,
    fisher_budget,
    fisher_information,
    improvement_ratio,
    input_from_budget,
    optimal_squeezing_fraction,
)

__all__ = [
    "BudgetSpec",
    "InputSpec",
    "LossyGaussianState",
    "budget_from_input",
    "enhancement",
    "enhancement_at_optimum",
    "fisher_budget",
    "fisher_information",
    "improvement_ratio",
    "input_from_budget",
    "optimal_squeezing_fraction",
]

__version__ = "0.1.0"
