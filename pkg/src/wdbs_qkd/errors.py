"""Exception types raised across the package."""
from __future__ import annotations


class WdbsError(Exception):
    """Base class for all package errors."""


class UnknownWavelengthError(WdbsError, LookupError):
    """A device was asked about a wavelength it has no calibration for."""

    def __init__(self, device: str, wavelength: float, known):
        self.device = device
        self.wavelength = wavelength
        self.known = tuple(sorted(known))
        known_txt = ", ".join(f"{w:g}" for w in self.known) or "none"
        super().__init__(
            f"{device}: no value for {wavelength:g} nm (known: {known_txt})"
        )


class DegenerateParametersError(WdbsError, ValueError):
    """Closed-form expression undefined at the requested parameters."""


class FitError(WdbsError):
    """Coupling-model fit failed; ``residuals`` holds the best attempt, if any."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TableError(WdbsError, ValueError):
    """Malformed device table file."""

    def __init__(self, path, message: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ConfigError(WdbsError, ValueError):
    """Scenario configuration failed validation.

    ``problems`` is a list of ``(field_path, message)`` pairs so every bad
    field is reported at once rather than one per run.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
