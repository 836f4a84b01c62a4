"""Exception types shared across the package."""


class NanovoidError(Exception):
    """Base class for all package errors."""


class DivergedError(NanovoidError):
    """A time integration produced non-finite or runaway field values.

    Carries the step index at which the blow-up was detected when the
    failure happened inside a multi-step driver.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class GradientUnavailable(NanovoidError):
    """A finite-difference probe diverged, so one gradient component is undefined."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class AbortedError(NanovoidError):
    """Training gave up after repeated divergence despite learning-rate backoff."""


class DimensionMismatchError(NanovoidError):
    """Two grids/masks that must share dimensions do not."""


class InvalidKError(NanovoidError):
    """Superpixel count outside the supported range for the image."""


class StaleAnnotationError(NanovoidError):
    """Annotation references a superpixel map other than the one stored."""


class LabelOutOfRangeError(NanovoidError):
    """Annotation selects a superpixel label that does not exist in the map."""


class SchemaError(NanovoidError):
    """A persisted or submitted document failed validation.

    `field` is the path of the offending field, e.g. "selected" or
    "pairs[2].k".
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
