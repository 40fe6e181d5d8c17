"""Exception types shared across the package.

The CLI maps these onto its exit codes: bad input 2, inconclusive 3,
verification mismatch 4, cap exceeded 5.
"""


class InputError(ValueError):
    """Malformed or out-of-contract input (parse errors, bad dimensions...)."""


class InconclusiveError(RuntimeError):
    """A search or certification ran out of budget without a definite answer."""


class MismatchError(RuntimeError):
    """A requested cross-verification (e.g. brute force) disagreed."""


class CapExceededError(RuntimeError):
    """An explicit state/size cap was hit before the construction finished."""
