"""Exception types raised by the simulation library."""


class RisEpError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(RisEpError, ValueError):
    """An argument is outside the domain of the operation."""




class DegenerateInputError(RisEpError, ValueError):
    """An input matrix carries no usable energy (e.g. an all-zero channel)."""


class DegenerateScheduleError(RisEpError, ValueError):
    """A reflection pattern cannot be built because every supporting RE is masked."""


class DegenerateDesignError(RisEpError, ValueError):
    """The LS training design does not identify the channel."""


class ConfigurationError(RisEpError, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class InfeasibleConfigurationError(ConfigurationError):
    """The requested eigenspace dimensions cannot be realised on the panel."""


class ExportError(RisEpError, OSError):
    """Writing or reading a results file failed."""
