"""Exception types shared across the toolkit."""


class PVTwinError(Exception):
    """Base class for all toolkit errors."""

    kind = "error"


class InputError(PVTwinError, ValueError):
    """Invalid or insufficient input data."""

    kind = "input_error"


class DegenerateConditionsError(InputError):
    """Operating conditions for which a model is undefined (e.g. zero irradiance)."""

    kind = "degenerate_conditions"


class NumericalError(PVTwinError, ArithmeticError):
    """A numerical procedure failed (division by zero, non-convergence, non-finite loss)."""

    kind = "numerical_error"

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigurationError(PVTwinError):
    """Inconsistent configuration (unknown fault target, bad network dimensions...)."""

    kind = "configuration_error"


class MissingArtifactError(PVTwinError):
    """A pipeline stage was run before the stage that produces its inputs."""

    kind = "missing_artifact"

    def __init__(self, stage, path):
        super().__init__(f"missing upstream artifact {path}; run the '{stage}' stage first")
        self.stage = stage
        self.path = str(path)
