"""Exception and warning types shared across the package."""


class SlnError(Exception):
    """Base class for all slnreg errors."""


class StructuralError(SlnError):
    """Malformed inputs: shape mismatches, rank deficiency, missing columns."""


class NumericError(SlnError):
    """Non-finite intermediates or an unrecoverable linear-algebra failure."""


class InferenceError(SlnError):
    """Resampling produced too few usable fits to form an estimate."""


class FitWarning(UserWarning):
    """Recoverable events during fitting (stalled steps, non-convergence)."""
