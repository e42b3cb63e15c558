"""Typical tables, counting, uniform sampling and phase-transition experiments
for contingency tables with block margins."""

__version__ = "0.1.0"

SCHEMA = "margin-phase/1"

from margin_phase.core import (  # noqa: E402
    BlockLabel,
    BlockSpec,
    Margins,
    block_margins,
    block_of,
    critical_B,
)

__all__ = [
    "BlockLabel",
    "BlockSpec",
    "Margins",
    "SCHEMA",
    "block_margins",
    "block_of",
    "critical_B",
]
