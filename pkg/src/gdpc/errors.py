"""Error type shared by every pipeline stage.

Each failure mode carries a stable machine-readable code (``E_SYNTAX``,
``E_DOMAIN``, ...) so that callers and tests can dispatch on it without
parsing messages.
"""

from __future__ import annotations


class GdpcError(Exception):
    """Pipeline error with a stable code and optional source location."""

    def __init__(self, code: str, message: str, *, line: int | None = None,
                 col: int | None = None):
        self.code = code
        self.line = line
        self.col = col
        super().__init__(message)

    def __str__(self) -> str:
        loc = ""
        if self.line is not None:
            loc = f" at line {self.line}"
            if self.col is not None:
                loc += f", col {self.col}"
        return f"{self.code}{loc}: {super().__str__()}"


def err(code: str, message: str, *, line: int | None = None,
        col: int | None = None) -> GdpcError:
    return GdpcError(code, message, line=line, col=col)
