# Exception types raised across the package. Input problems are ValueErrors; the CLI maps
# each class to its own exit code.


class ConfigError(ValueError):
    """An invalid or incomplete run configuration."""


class DataError(ValueError):
    """Audio, annotation, manifest or embedding data that cannot be used as given."""


class NumericError(ArithmeticError):
    """A numerical failure, e.g. a non-finite loss or feature value."""
