"""Exception types raised by the package."""


class PortfolioError(Exception):
    """Base class for all package errors."""


class ConfigError(PortfolioError, ValueError):
    """Invalid user-supplied configuration (unknown tag, bad shape, bad range)."""


class RegularityError(PortfolioError, ValueError):
    """Too few observation periods: the return matrix would be singular (needs p > N)."""


class SingularMatrixError(PortfolioError):
    """The risk matrix is not numerically positive definite."""


class InfeasibleRiskError(PortfolioError, ValueError):
    """Requested risk lies below the minimal achievable risk (tau < 1)."""


class DegenerateReturnsError(PortfolioError):
    """Mean returns are proportional to the all-ones vector in the inverse-risk metric."""


class AsymptoticRegimeError(PortfolioError, ValueError):
    """Large-N formulas requested at alpha <= 1, where they diverge."""


class OracleDivergenceError(PortfolioError):
    """The numerical KKT oracle failed to converge."""


class InternalError(PortfolioError):
    """A state that the constraints should make impossible."""
