"""Structured error types shared across the engine.

Every parser and validator raises one of these instead of leaking
json/struct/OS exceptions, so batch drivers can isolate failures per item.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-raised errors."""


class ManifestError(EngineError):
    """Manifest file missing, malformed, or violating the schema.

    ``field`` carries the dotted path of the offending field when known,
    e.g. ``videos[0].fps``.
    """

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DepthFormatError(EngineError):
    """Binary depth buffer does not follow the MGD1 layout."""


class QAFormatError(EngineError):
    """QA record file malformed; ``line`` is 1-based when known."""

    def __init__(self, message: str, *, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class TrackFormatError(EngineError):
    """Track file malformed."""


class DetectionFormatError(EngineError):
    """Detection file malformed; ``line`` is 1-based when known."""

    def __init__(self, message: str, *, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class BundleValidationError(EngineError):
    """Cross-checks over a perception bundle failed.

    Collects every violation instead of stopping at the first one.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        summary = "; ".join(self.violations[:5])
        if len(self.violations) > 5:
            summary += f"; ... ({len(self.violations)} violations total)"
        super().__init__(summary)


class GeometryError(EngineError):
    """Invalid geometric input (bad depth value, dimension mismatch)."""


class PromptError(EngineError):
    """Prompt or judge-request rendering rejected its input."""
