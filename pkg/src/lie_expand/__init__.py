"""Exact BCH algebra, commutator word synthesis and delta-discretized set experiments."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BudgetExceeded,
    DomainError,
    InfeasibleConstraint,
    LieExpandError,
    ResourceLimitError,
    UsageError,
)
from .free_lie import FreeLieElement, bch, bracket, format_element, parse_element, valuation
from .groups import get_backend
from .word_synth import GroupWord, certify, synthesize, word_log

__all__ = [
    "BudgetExceeded",
    "DomainError",
    "FreeLieElement",
    "GroupWord",
    "InfeasibleConstraint",
    "LieExpandError",
    "ResourceLimitError",
    "UsageError",
    "__version__",
    "bch",
    "bracket",
    "certify",
    "format_element",
    "get_backend",
    "parse_element",
    "synthesize",
    "valuation",
    "word_log",
]
