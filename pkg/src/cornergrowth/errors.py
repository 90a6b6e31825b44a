"""Exception types shared by the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceError(MemoryError):
    """A requested grid would exceed the configured memory cap."""


class ContractViolation(AssertionError):
    """An exact identity that must hold on every sample was broken."""
