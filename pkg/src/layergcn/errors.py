"""Exception types shared across the package."""


class LayerGCNError(Exception):
    """Base class for errors raised by this package."""


class DataError(LayerGCNError, ValueError):
    """Malformed, empty, or inconsistent interaction data."""


class ConfigError(LayerGCNError, ValueError):
    """Invalid configuration. ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(LayerGCNError, ArithmeticError):
    """Non-finite values appeared during forward, backward or loss evaluation."""
