"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the command layer can
translate failures without knowing where they were raised.
"""


class PlstmError(Exception):
    exit_code = 2


class ShapeError(PlstmError, ValueError):
    pass


class UsageError(PlstmError, ValueError):
    pass


class VocabularyError(UsageError):
    pass


class SynchronizationError(UsageError):
    pass


class ProtocolError(UsageError):
    pass


class StratificationError(ProtocolError):
    pass


class ConfigError(UsageError):
    pass


class CompatibilityError(UsageError):
    pass


class FormatError(PlstmError, ValueError):
    exit_code = 3


class NumericError(PlstmError, ArithmeticError):
    exit_code = 1
