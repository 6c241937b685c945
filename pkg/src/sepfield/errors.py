"""Exception types shared across the package."""


class SepfieldError(Exception):
    """Base class for all errors raised by this package."""


class NonPolynomialError(SepfieldError):
    """Operation requires a nonzero polynomial."""


class MultipleRootError(SepfieldError):
    """A real root of p violates the simple-root requirement p'(t_j) != 0."""


class DegenerateRootError(SepfieldError):
    """|p'(t_j)| too small to form a stable residue at t_j."""


class HypothesisViolationError(SepfieldError):
    """Vector field violates a structural hypothesis (common zero, multiple root)."""


class CrossesCharacteristicError(SepfieldError):
    """Flow endpoints straddle a degenerate characteristic t = t_j."""


class OnCharacteristicError(SepfieldError):
    """Evaluation requested on a characteristic line t = t_j."""


class CrossingNotFoundError(SepfieldError):
    """Characteristic never meets the Cauchy transversal inside the window."""


class ToleranceNotMetError(SepfieldError):
    """Quadrature finished above the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NonEvaluableError(SepfieldError):
    """Derivative order exceeds what the data representation supports."""


class FitFailureError(SepfieldError):
    """Regression fit failed its quality gate."""


class WindowLeakError(SepfieldError):
    """Function does not decay to numerical zero at the grid edge."""


class SpecError(SepfieldError):
    """Malformed problem specification."""
