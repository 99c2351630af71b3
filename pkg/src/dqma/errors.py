"""Exception hierarchy shared by every dqma module."""


class DqmaError(Exception):
    """Base class for all errors raised by dqma."""


class LayoutError(DqmaError):
    """Register names collide, are missing, or layouts disagree."""


class CapacityError(DqmaError):
    """A state would exceed the dense-simulation qubit cap."""


class DegenerateBranchError(DqmaError):
    """Conditioning on an outcome whose probability is (numerically) zero."""


class LocalityViolation(DqmaError):
    """A node touched a register it does not own, or sent across a non-edge."""


class ConfigError(DqmaError):
    """Malformed or inconsistent experiment configuration."""
