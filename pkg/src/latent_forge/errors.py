"""Exception hierarchy shared by all modules."""


class LatentForgeError(Exception):
    """Base class for package errors."""


class InvalidArgument(LatentForgeError, ValueError):
    pass


class InvalidState(LatentForgeError, RuntimeError):
    pass


class NumericFailure(LatentForgeError, ArithmeticError):
    pass


class LoadFailure(LatentForgeError, OSError):
    """A container or checkpoint on disk could not be read back."""
