"""Exception hierarchy shared by the samplers, ingestion and CLI."""

from __future__ import annotations

from typing import Optional


class LowRankError(Exception):
    """Base class for every error raised by the package."""


class UsageError(LowRankError, ValueError):
    """Invalid arguments: bad shapes, out-of-range indices, empty inputs."""


class DataError(LowRankError):
    """A dataset or artifact could not be read."""


class ParseError(DataError):
    def __init__(self, line_number: int, content: str, reason: str = "malformed line"):
        self.line_number = line_number
        self.content = content
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}: {content!r}")


class NumericalError(LowRankError, ArithmeticError):
    """A precision matrix failed its Cholesky factorization.

    ``minor`` is the 1-based order of the leading minor that is not
    positive definite (LAPACK ``info``).
    """

    def __init__(
        self,
        minor: int,
        block: Optional[str] = None,
        row: Optional[int] = None,
        message: str = "matrix is not positive definite",
    ):
        self.minor = minor
        self.block = block
        self.row = row
        where = ""
        if block is not None:
            where = f" (block {block}, row {row})"
        super().__init__(f"{message}: leading minor {minor}{where}")

    def with_context(self, block: str, row: int) -> "NumericalError":
        return NumericalError(self.minor, block=block, row=row)


__all__ = [
    "LowRankError",
    "UsageError",
    "DataError",
    "ParseError",
    "NumericalError",
]
