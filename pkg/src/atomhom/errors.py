"""Exception types shared across the package."""


class AtomHomError(Exception):
    """Base class for all package errors."""


class CutoffError(AtomHomError, ValueError):
    """A state does not fit inside the requested occupation cutoff.

    ``required`` carries the smallest cutoff that would have worked, when known.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class ModeError(AtomHomError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "mode error"


class DomainError(AtomHomError, ValueError):
    pass


class UndefinedVisibilityError(AtomHomError, ValueError):
    pass


class GeometryError(AtomHomError, ValueError):
    pass


class InputError(AtomHomError, ValueError):
    pass


class DegenerateFitError(AtomHomError, ValueError):
    pass


class FitError(AtomHomError, RuntimeError):
    """Dip fit did not converge; ``last`` holds the final parameter vector."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ConfigError(AtomHomError, ValueError):
    """Invalid scenario configuration. ``path`` is the dotted key, ``line`` 1-based."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path:
            where += f"{path}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
        self.path = path
        self.line = line
