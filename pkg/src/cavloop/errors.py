"""Exception types shared across the package.

Each class maps onto one stable CLI error category (see cli.EXIT_CODES).
"""


class CavloopError(Exception):
    """Base class for all package errors."""


class ConfigError(CavloopError):
    """Invalid or inconsistent run configuration.

    Carries a list of individual violations so that a single parse pass
    can report everything that is wrong with a config file.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class LoopInstabilityError(CavloopError):
    """The dissipative feedback loop is at or beyond its instability point.

    Raised instead of silently returning divergent susceptibilities or PSDs.
    """


class UnsupportedConfigurationError(CavloopError):
    """A closed form was requested outside its domain of validity.

    Example: the zero-detuning homodyne expressions with a multi-pole
    thermal model.  The brute-force linear-system route has no such limits.
    """


class FitConvergenceError(CavloopError):
    """A least-squares fit failed to converge or produced unusable output."""


class SpectrumIOError(CavloopError):
    """Malformed spectrum file or incompatible metadata."""
