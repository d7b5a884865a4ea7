from __future__ import annotations


class RagmtError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RagmtError):
    """Invalid configuration detected before any work started."""


class CorpusError(RagmtError):
    """Unreadable or structurally broken corpus input."""


class VectorError(RagmtError):
    """Malformed embedding input or undefined vector operation."""


class AnnIndexError(RagmtError):
    """Index construction, query, or file-format failure."""


class BudgetError(RagmtError):
    """The fixed prompt parts alone do not fit the configured budget."""

    def __init__(self, required: int, available: int, unit: str) -> None:
        super().__init__(f"fixed prompt parts need {required} {unit}, budget allows {available}")
        self.required = required
        self.available = available
        self.unit = unit


class BackendError(RagmtError):
    """A remote call failed permanently."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 0) -> None:
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class AuthError(BackendError):
    """The service rejected our credentials; never retried."""


class EmptyTranslationError(RagmtError):
    """Every regeneration attempt came back empty."""

    def __init__(self, attempts: int) -> None:
        super().__init__(f"backend returned an empty translation on all {attempts} regenerations")
        self.attempts = attempts
