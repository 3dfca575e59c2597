"""Exception types shared across tomokit.

ValidationError maps to CLI exit code 2, BudgetError to exit code 3.
GridFormatError carries a short machine-readable .code so callers can tell
a bad magic from a truncated payload without parsing prose.
"""


class ValidationError(ValueError):
    """Input rejected before any numerics ran."""


class BudgetError(RuntimeError):
    """A declared numerical budget (quadrature size, kernel cost) was exceeded
    or an accuracy contract could not be met."""


class GridFormatError(ValidationError):
    """Malformed TOMOGRD1 stream.

    Codes: bad-magic, bad-header, truncated, payload-size-mismatch,
    non-finite-sample.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
