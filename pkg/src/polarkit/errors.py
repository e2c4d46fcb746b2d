"""Shared exception types."""


class ResourceCapError(RuntimeError):
    """A computation would exceed a configurable resource cap.

    Carries the name of the CLI flag (equivalently, the keyword argument of
    the library call) that raises the cap.
    """

    def __init__(self, message: str, flag: str | None = None):
        super().__init__(message)
        self.flag = flag
