"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class InfeasibleError(DomainError):
    """A design or construction problem has no solution for the given inputs."""


class ContractError(ValueError):
    """Inputs violate a structural precondition (lengths, weight budget, ...)."""


class BatteryFormatError(ValueError):
    """A TSV input file could not be parsed.

    Attributes:
        path: file that failed to parse.
        line: 1-based line number of the offending row (None if not row-specific).
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
