"""Exception hierarchy shared by every module."""


class MacdaError(Exception):
    """Base class for all errors raised by this package."""


class ValenceError(MacdaError, ValueError):
    """A molecular graph violates a structural or valence invariant."""

    def __init__(self, message, atom=None):
        super().__init__(message)
        self.atom = atom


class SmilesError(MacdaError, ValueError):
    """A SMILES string could not be parsed.

    ``offset`` is the byte offset of the offending token in the input.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.reason = message
        self.offset = offset


class SequenceError(MacdaError, ValueError):
    """Invalid protein sequence or mutation request."""


class ActionError(MacdaError, ValueError):
    """An action is not applicable to the current state."""


class EmptyActionSpaceError(ActionError):
    """One side of the joint search has no legal action."""

    def __init__(self, side):
        super().__init__(f"empty {side} action space")
        self.side = side


class DimensionError(MacdaError, ValueError):
    """Array shapes do not agree."""


class IntegrityError(MacdaError):
    """A stored record does not reproduce its own reward breakdown."""


class DataError(MacdaError):
    """Dataset file is missing, malformed or contains invalid rows."""


class ConfigError(MacdaError):
    """Run configuration is invalid."""
