"""Exception types raised across the package."""


class ChainFracError(Exception):
    """Base class for all domain errors."""


class DomainError(ChainFracError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class AxiomViolation(ChainFracError):
    """The interaction model does not satisfy a structural assumption."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CertificateFailure(ChainFracError):
    """A numerical certificate could not be established."""


class BoundaryViolation(ChainFracError, ValueError):
    """A chain configuration violates the Dirichlet/slope boundary conditions."""


class SingularState(ChainFracError):
    """A configuration has a bond slope at or below the barrier guard."""


class NoFeasibleStart(ChainFracError):
    """No admissible initial configuration could be constructed."""


class NonConvergence(ChainFracError):
    """An iterative estimate failed to settle within tolerance."""


class SignStructureViolation(ChainFracError):
    """The load derivative changes sign in the deformation variable.

    ``witness`` holds ``(x, w1, w2)`` with dPhi/du(x, w1) and dPhi/du(x, w2)
    of strictly opposite signs.
    """

    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


class ConstructionFailure(ChainFracError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(ChainFracError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
