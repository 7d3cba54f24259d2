"""Exception types shared across the package."""


class LieExpandError(Exception):
    """Base class for all package errors."""


class UsageError(LieExpandError, ValueError):
    """Invalid arguments or mismatched operands."""


class DomainError(LieExpandError, ValueError):
    """A point falls outside the chart or domain where an operation is defined."""


class BudgetExceeded(LieExpandError):
    """A configured resource cap was hit and the caller asked for a hard failure."""


class ResourceLimitError(LieExpandError):
    """A construction would exceed its configured size limit."""


class InfeasibleConstraint(LieExpandError, ValueError):
    """A linear constraint cannot be satisfied within tolerance."""
