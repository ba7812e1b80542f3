"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain of the formula it feeds."""


class UnphysicalStateError(ValueError):
    """Quadrature variances violate the uncertainty bound."""


class DegenerateInputError(ValueError):
    """The input carries no photons, so ratios like the squeezing fraction are undefined."""


class InconsistentParameterError(ValueError):
    """A squeezing parameter contradicts the photon budget it was passed with."""


class CutoffError(ValueError):
    """The Fock cutoff cannot hold the state within the truncation budget."""


class EstimatorError(ValueError):
    """The estimator is degenerate (zero variance) or otherwise unusable."""


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""
