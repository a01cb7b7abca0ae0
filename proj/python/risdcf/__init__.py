"""RIS-assisted DCF: channel model, analytic throughput, protocol and simulator."""

from ._risdcf import *  # noqa: F401,F403
from ._risdcf import (  # noqa: F401
    ConfigError,
    CorruptionError,
    DomainError,
    FormatError,
    JoinError,
    NumericalError,
    SimulationError,
)

__version__ = "0.1.0"
