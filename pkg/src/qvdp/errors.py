"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems (bad flags, unknown
keys) exit with 2, numerical guard trips (schedule finer than the step,
truncation overflow, trace drift) exit with 3.
"""


class QvdpError(Exception):
    """Base class for all package-specific errors."""


class DomainError(QvdpError, ValueError):
    """A physical parameter is outside its admissible domain."""


class ConfigError(QvdpError, ValueError):
    """An integrator or experiment configuration is invalid."""


class ScheduleError(QvdpError, ValueError):
    """A measurement schedule cannot be aligned with the integration grid."""


class StateError(QvdpError, RuntimeError):
    """An operation was applied to a state that cannot support it."""


class TruncationError(QvdpError, RuntimeError):
    """A displacement or grid exceeds the safe Fock-space truncation."""


class TraceDriftError(QvdpError, RuntimeError):
    """Density-matrix trace drifted beyond the per-step tolerance."""
