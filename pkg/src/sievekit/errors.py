"""Exception hierarchy shared across sievekit."""


class SievekitError(Exception):
    """Base class for all sievekit errors."""


class InputError(SievekitError, ValueError):
    """Malformed input: bad basis files, out-of-range parameters."""


class DomainError(InputError):
    """A numeric argument lies outside the domain of a formula."""


class SingularBasisError(InputError):
    """The basis rows are linearly dependent."""


class OracleCapError(SievekitError):
    """Exact enumeration refused because the dimension is too large."""


class EmptyResultError(SievekitError):
    """An enumeration bound admitted no lattice vector."""


class ListStarvationError(SievekitError):
    """A Nguyen-Vidick style sieve ran out of vectors before converging.

    ``trace`` holds the per-iteration records collected up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class CertificationError(SievekitError):
    """A preprocessing radius is below the threshold for the requested mode."""


class WrongLatticeError(SievekitError):
    """A preprocessed list was queried with a basis it was not built from."""


class FormatError(InputError):
    """A serialized file could not be parsed."""
