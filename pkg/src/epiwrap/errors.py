"""Exception types shared across the pipeline.

Domain errors (bad numeric inputs) use plain ValueError; everything that
needs a distinct exit code or extra payload gets its own class here.
"""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file (CLI exit code 2)."""


class IdxParseError(ValueError):
    """Malformed IDX payload. Carries the byte offset where parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ChecksumError(RuntimeError):
    """A cached or downloaded file does not match its pinned SHA-256 digest."""


class FetchError(RuntimeError):
    """A dataset download failed; the operation is safe to retry."""


class TrainingDivergedError(RuntimeError):
    """Training loss blew up. Carries the batch index that triggered the abort."""

    def __init__(self, message, batch_index=None):
        super().__init__(message)
        self.batch_index = batch_index


class ConsonanceError(ValueError):
    """A mass matrix came out structurally negative (non-unimodal contour)."""
