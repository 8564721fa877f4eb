class InvalidProblemError(ValueError):
    pass


class InvalidMeshError(ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureError(RuntimeError):
    """Reference quadrature failed to reach its tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


class OracleError(RuntimeError):
    """A reference solution is too coarse, or two references disagree."""
