"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to converge or diverged."""


class DegenerateCovarianceError(ValueError):
    """A covariance matrix is singular where an invertible one is required."""


class DensityUndefinedError(ValueError):
    """A probability density was requested where it does not exist."""


class PosteriorUndefinedError(DensityUndefinedError):
    """A pair posterior was requested at a point of zero source density."""
