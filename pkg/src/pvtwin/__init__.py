"""PV plant digital twin: production modeling, dynamic losses, synthetic
faults, neural signal estimators and threshold fault detection."""
from .errors import (ConfigurationError, DegenerateConditionsError, InputError,
                     MissingArtifactError, NumericalError, PVTwinError)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigurationError", "DegenerateConditionsError", "InputError",
    "MissingArtifactError", "NumericalError", "PVTwinError", "__version__",
]
