"""Exception types raised across the toolkit."""


class PwlnasError(Exception):
    """Base class for toolkit errors."""


class NoValidMutation(PwlnasError):
    pass


class InvalidArch(PwlnasError):
    def __init__(self, violations, where=""):
        self.violations = list(violations)
        prefix = f"{where}: " if where else ""
        super().__init__(prefix + "; ".join(self.violations))


class ParseError(PwlnasError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class DuplicateKey(PwlnasError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate architecture key {key!r}")


class ExhaustedSpace(PwlnasError):
    pass


class InvalidPortion(PwlnasError):
    pass


class BudgetExhausted(PwlnasError):
    pass


class UnknownKey(PwlnasError, KeyError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"unknown architecture key {key!r}")

    def __str__(self):
        return self.args[0]


class ShapeError(PwlnasError, ValueError):
    pass


class NonFiniteLoss(PwlnasError):
    def __init__(self, epoch, batch, value):
        self.epoch, self.batch, self.value = epoch, batch, value
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")


class LengthMismatch(PwlnasError, ValueError):
    pass


class NoStrictPairs(PwlnasError):
    pass


class EmptyPairs(PwlnasError, ValueError):
    pass


class TooFew(PwlnasError, ValueError):
    pass


class InvalidT(PwlnasError, ValueError):
    pass


class InvalidK(PwlnasError, ValueError):
    pass


class ExhaustedNeighborhood(PwlnasError):
    def __init__(self, achieved, wanted):
        self.achieved, self.wanted = achieved, wanted
        super().__init__(
            f"only {achieved} distinct in-table mutants found, {wanted} requested")


class ConfigError(PwlnasError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))
