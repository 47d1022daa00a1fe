"""Exception hierarchy shared by all modules."""


class LatticeError(Exception):
    """Base class for every error raised by :mod:`latticeshaping`."""


class ArgumentError(LatticeError, ValueError):
    """Invalid argument: wrong dimension, out-of-range value, bad mode."""


class SpecificationError(LatticeError, ValueError):
    """A generator or parity-check matrix violates a structural constraint."""


class ConstructionError(LatticeError):
    """A requested construction is infeasible (e.g. degree too large for n)."""


class CorruptionError(LatticeError):
    """Decoded integers are inconsistent with the codebook (upstream decode failure)."""


class TruncationError(LatticeError, ValueError):
    """A bit string ends with a dangling suffix that is not a codeword."""


class NumericalRegimeError(LatticeError, ValueError):
    """Parameters put a formula outside its valid numerical range."""
