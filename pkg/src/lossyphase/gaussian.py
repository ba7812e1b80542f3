"""Closed-form Gaussian results for coherent light plus squeezed vacuum under loss.

Two parametrizations are used throughout:

* the physical input ``(alpha, r, sigma)``: coherent amplitude, squeezing
  parameter and loss fraction;
* the photon budget ``(N, mu, n_loss)``: mean photon number after losses,
  fraction of those photons coming from the squeezed mode, and mean number of
  photons lost.

The coherent amplitude is taken real and non-negative, with the squeezing axis
aligned so that the ``x`` quadrature is the squeezed one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DegenerateInputError,
    DomainError,
    InconsistentParameterError,
    UnphysicalStateError,
)

__all__ = [
    "InputSpec",
    "BudgetSpec",
    "LossyGaussianState",
    "apply_loss_coherent",
    "lossy_variances",
    "squeezed_thermal_params",
    "squeezed_thermal_variances",
    "budget_from_input",
    "input_from_budget",
    "consistent_squeezing",
    "fisher_information",
    "fisher_budget",
    "enhancement",
    "optimal_squeezing_fraction",
    "enhancement_at_optimum",
    "improvement_ratio",
]

# 16 var_x var_y may undershoot 1 by this much before the state counts as unphysical
PHYSICALITY_TOL = 1e-9
# relative mismatch tolerated between a caller's r and the budget's own r
CONSISTENCY_TOL = 1e-8


def _check_sigma(sigma, closed=False):
    upper_ok = sigma <= 1.0 if closed else sigma < 1.0
    if not (sigma >= 0.0 and upper_ok):
        interval = "[0, 1]" if closed else "[0, 1)"
        raise DomainError(f"loss fraction sigma={sigma!r} outside {interval}")


def _check_nonneg(name, value):
    if not value >= 0.0:
        raise DomainError(f"{name}={value!r} must be >= 0")


@dataclass(frozen=True)
class InputSpec:
    """Physical input: coherent amplitude, squeezing parameter, loss fraction."""

    alpha: float
    r: float
    sigma: float

    def __post_init__(self):
        _check_nonneg("alpha", self.alpha)
        _check_nonneg("r", self.r)
        _check_sigma(self.sigma)

    @property
    def n_total(self) -> float:
        """Mean photon number after losses."""
        return (1.0 - self.sigma) * (self.alpha**2 + math.sinh(self.r) ** 2)


@dataclass(frozen=True)
class BudgetSpec:
    """Photon budget: ``n_total`` after losses, squeezing fraction, photons lost."""

    n_total: float
    mu: float
    n_loss: float

    def __post_init__(self):
        _check_nonneg("n_total", self.n_total)
        if not 0.0 <= self.mu <= 1.0:
            raise DomainError(f"squeezing fraction mu={self.mu!r} outside [0, 1]")
        _check_nonneg("n_loss", self.n_loss)

    @property
    def sigma(self) -> float:
        """Loss fraction implied by the budget."""
        total = self.n_total + self.n_loss
        if total == 0.0:
            raise DegenerateInputError("empty photon budget")
        return self.n_loss / total


@dataclass(frozen=True)
class LossyGaussianState:
    """Post-loss parameters of the two input modes.

    ``var_x``/``var_y`` are the quadrature variances of the squeezed mode,
    ``lam``/``r_red`` its squeezed-thermal decomposition and ``n2`` its mean
    photon number.
    """

    alpha_red: float
    var_x: float
    var_y: float
    lam: float
    r_red: float
    n2: float

    @classmethod
    def from_input(cls, spec: InputSpec) -> "LossyGaussianState":
        var_x, var_y = lossy_variances(spec.r, spec.sigma)
        lam, r_red = squeezed_thermal_params(var_x, var_y)
        return cls(
            alpha_red=apply_loss_coherent(spec.alpha, spec.sigma),
            var_x=var_x,
            var_y=var_y,
            lam=lam,
            r_red=r_red,
            n2=(1.0 - spec.sigma) * math.sinh(spec.r) ** 2,
        )


def apply_loss_coherent(alpha: float, sigma: float) -> float:
    """Amplitude of a coherent state after losing the fraction ``sigma`` of its photons."""
    _check_nonneg("alpha", alpha)
    _check_sigma(sigma)
    return math.sqrt(1.0 - sigma) * alpha


def lossy_variances(r: float, sigma: float) -> tuple[float, float]:
    """Quadrature variances ``(var_x, var_y)`` of squeezed vacuum after loss.

    ``sigma = 1`` is allowed and returns the vacuum variances.
    """
    _check_nonneg("r", r)
    _check_sigma(sigma, closed=True)
    var_x = (sigma + (1.0 - sigma) * math.exp(-2.0 * r)) / 4.0
    var_y = (sigma + (1.0 - sigma) * math.exp(2.0 * r)) / 4.0
    return var_x, var_y


def squeezed_thermal_variances(lam: float, r_red: float) -> tuple[float, float]:
    """Forward map from the squeezed-thermal parameters to ``(var_x, var_y)``."""
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"thermal parameter lam={lam!r} outside [0, 1)")
    scale = (1.0 + lam) / (1.0 - lam)
    return scale * math.exp(-2.0 * r_red) / 4.0, scale * math.exp(2.0 * r_red) / 4.0


def squeezed_thermal_params(var_x: float, var_y: float) -> tuple[float, float]:
    """Invert the squeezed-thermal variances: returns ``(lam, r_red)``.

    States sitting on the uncertainty bound (within rounding) are pure, and map
    to ``lam = 0``.
    """
    if not (var_x > 0.0 and var_y > 0.0):
        raise UnphysicalStateError(f"variances must be positive, got {var_x!r}, {var_y!r}")
    product = 16.0 * var_x * var_y
    if product < 1.0 - PHYSICALITY_TOL:
        raise UnphysicalStateError(
            f"16 var_x var_y = {product!r} violates the uncertainty bound"
        )
    s = math.sqrt(max(product, 1.0))
    lam = (s - 1.0) / (s + 1.0)
    r_red = 0.25 * math.log(var_y / var_x)
    return lam, r_red


def budget_from_input(spec: InputSpec) -> BudgetSpec:
    """Convert ``(alpha, r, sigma)`` into ``(N, mu, n_loss)``."""
    squeezed = (1.0 - spec.sigma) * math.sinh(spec.r) ** 2
    n_total = (1.0 - spec.sigma) * spec.alpha**2 + squeezed
    if n_total == 0.0:
        raise DegenerateInputError("alpha = r = 0: squeezing fraction undefined")
    return BudgetSpec(
        n_total=n_total,
        mu=min(squeezed / n_total, 1.0),
        n_loss=n_total * spec.sigma / (1.0 - spec.sigma),
    )


def input_from_budget(budget: BudgetSpec) -> InputSpec:
    """Invert :func:`budget_from_input`."""
    if not budget.n_total > 0.0:
        raise DegenerateInputError("N must be > 0 to recover the input")
    sigma = budget.sigma
    pre_loss = budget.n_total / (1.0 - sigma)
    return InputSpec(
        alpha=math.sqrt((1.0 - budget.mu) * pre_loss),
        r=math.asinh(math.sqrt(budget.mu * pre_loss)),
        sigma=sigma,
    )


def consistent_squeezing(budget: BudgetSpec) -> float:
    """Squeezing parameter ``r`` implied by a photon budget."""
    return input_from_budget(budget).r


def fisher_information(spec: InputSpec) -> float:
    """Fisher information of the lossy squeezed-coherent state."""
    a2 = spec.alpha**2
    s = spec.sigma
    return (1.0 - s) * (a2 / (s + (1.0 - s) * math.exp(-2.0 * spec.r)) + math.sinh(spec.r) ** 2)


def fisher_budget(
    budget: BudgetSpec,
    r: float | None = None,
    *,
    ideal_squeezing: bool = False,
    check: bool = True,
) -> float:
    """Fisher information in the photon-budget parametrization.

    Exactly one of ``r`` and ``ideal_squeezing`` must be given. With
    ``ideal_squeezing=True`` the ``exp(-2r)`` term is dropped, which gives
    ``N**2 * enhancement(mu, n_loss) + N``. With an explicit ``r`` and
    ``check=True`` the value is compared against the squeezing implied by the
    budget and :class:`InconsistentParameterError` is raised on mismatch.
    """
    if (r is None) == (not ideal_squeezing):
        raise ValueError("pass either r or ideal_squeezing=True, not both or neither")
    n, mu = budget.n_total, budget.mu
    if ideal_squeezing:
        return n * n * enhancement(mu, budget.n_loss) + n
    _check_nonneg("r", r)
    if check and n > 0.0:
        expected = consistent_squeezing(budget)
        if abs(r - expected) > CONSISTENCY_TOL * max(1.0, expected):
            raise InconsistentParameterError(
                f"r={r!r} contradicts the budget, which implies r={expected!r}"
            )
    if mu == 0.0:
        return n
    denominator = -math.expm1(-2.0 * r) + 4.0 * mu * budget.n_loss
    return n * n * 4.0 * (1.0 - mu) * mu / denominator + n


def enhancement(mu: float, n_loss: float) -> float:
    """Fisher information above shot noise per squared photon number, high-squeezing limit."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"squeezing fraction mu={mu!r} outside [0, 1]")
    _check_nonneg("n_loss", n_loss)
    return 4.0 * mu * (1.0 - mu) / (1.0 + 4.0 * mu * n_loss)


def _root(n_loss):
    _check_nonneg("n_loss", n_loss)
    return math.sqrt(1.0 + 4.0 * n_loss)


def optimal_squeezing_fraction(n_loss: float) -> float:
    """Squeezing fraction maximizing :func:`enhancement` at fixed ``n_loss``.

    Written as ``1 / (1 + sqrt(1 + 4 n_loss))``, which equals
    ``(sqrt(1 + 4 n_loss) - 1) / (4 n_loss)`` but stays finite at zero loss.
    """
    return 1.0 / (1.0 + _root(n_loss))


def enhancement_at_optimum(n_loss: float) -> float:
    """Enhancement reached at :func:`optimal_squeezing_fraction`."""
    return 4.0 / (1.0 + _root(n_loss)) ** 2


def improvement_ratio(n_loss: float) -> float:
    """Optimized enhancement divided by the enhancement at ``mu = 1/2``.

    Lies in ``[1, 2)`` and tends to 2 for large losses.
    """
    s = _root(n_loss)
    return 2.0 * (1.0 + 2.0 * n_loss) / (1.0 + 2.0 * n_loss + s)
