"""Exception types raised across the package."""


class SpeciesSamplingError(Exception):
    """Base class for all package-specific errors."""


class MissingEntry(SpeciesSamplingError, KeyError):
    """A composition needed for a computation is absent from an EPPF table."""

    def __init__(self, composition):
        self.composition = tuple(composition)
        super().__init__(f"composition {self.composition} not in table")

    def __str__(self):
        return self.args[0]


class PathDependent(SpeciesSamplingError, ValueError):
    """Two insertion orders for the same composition gave different values."""

    def __init__(self, composition, canonical, alternate, canonical_path, alternate_path):
        self.composition = tuple(composition)
        self.canonical = canonical
        self.alternate = alternate
        self.canonical_path = tuple(canonical_path)
        self.alternate_path = tuple(alternate_path)
        super().__init__(
            f"path dependence at {self.composition}: "
            f"{canonical!r} along {self.canonical_path} vs "
            f"{alternate!r} along {self.alternate_path}"
        )


class TruncationOverflow(SpeciesSamplingError, RuntimeError):
    """Weight truncation would need more atoms than the configured hard cap."""


class Exhausted(SpeciesSamplingError, ValueError):
    """More size-biased picks were requested than there are atoms."""


class InsufficientPrefix(SpeciesSamplingError, ValueError):
    """A size-biased prefix is shorter than the number of clusters."""


class DegenerateWeights(SpeciesSamplingError, RuntimeError):
    """Every importance weight underflowed."""


class EmptyChain(SpeciesSamplingError, ValueError):
    """A posterior summary was requested for a chain with no states."""
