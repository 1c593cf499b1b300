"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class GridMismatch(ToolkitError):
    """Operands live on different time grids."""


class UnresolvedPulse(ToolkitError):
    """Pulse width too small for the grid spacing."""


class ClippedSupport(ToolkitError):
    """Envelope support does not fit inside the grid."""


class EnergyLeak(ToolkitError):
    """Boundary clipping discarded a non-negligible energy fraction."""


class ConservationViolation(ToolkitError):
    """Signal energy drifted beyond tolerance during propagation."""


class CollisionIncomplete(ToolkitError):
    """Pump pulses still overlap at a medium boundary."""


class BasisIncomplete(ToolkitError):
    """Expansion basis failed to capture the propagated energy."""


class PairingFailure(ToolkitError):
    """Cross-channel Schmidt-mode pairing could not be resolved."""


class InvalidCoefficient(ToolkitError):
    """Schmidt coefficient outside the physical range [0, 1]."""


class NotBracketed(ToolkitError):
    """Calibration target lies outside the reachable range."""


class ConfigMismatch(ToolkitError):
    """Cascade configuration violates the stage-ordering rules."""


class ConfigError(ToolkitError):
    """Base class for experiment-configuration errors."""


class ParseError(ConfigError):
    """Malformed configuration text."""


class UnknownKey(ConfigError):
    """Configuration key not recognized."""


class MissingSection(ConfigError):
    """Required configuration section absent."""
