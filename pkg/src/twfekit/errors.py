"""Exception types shared across the package."""


class PanelError(ValueError):
    """Raised when input data cannot form a valid balanced panel."""


class NoIdentifyingVariation(ValueError):
    """Raised when an estimator's identifying variation is numerically zero.

    Callers can distinguish "your data cannot answer this question" from
    programming errors: this subclass of ValueError always means that a
    denominator (or a rank condition backing one) degenerated.
    """
