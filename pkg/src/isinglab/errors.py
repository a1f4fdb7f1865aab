"""Exception types shared across the package."""


class IsingLabError(Exception):
    """Base class for package errors."""


class CapacityExceeded(IsingLabError):
    """Requested exact computation is beyond the enumeration capacity."""


class WidthExceeded(IsingLabError):
    """Transfer-matrix column height beyond the supported cap."""


class SupportOutOfBox(IsingLabError):
    """Local function support is not contained in the box."""


class NotSingleInterface(IsingLabError):
    """Operation requires exactly one open contour."""


class NotConverged(IsingLabError):
    """Iterative estimate did not converge."""


class SignalBelowNoise(IsingLabError):
    """Differences are indistinguishable from numerical/statistical noise."""


class IncompatibleFamily(IsingLabError):
    """Contour family is not realizable under the given boundary condition."""
