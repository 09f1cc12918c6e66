"""Exception taxonomy shared by every subpackage.

Three branches map onto CLI exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4. Everything else is a plain FineBuildError.
"""


class FineBuildError(Exception):
    """Base class for all package errors."""


class ConfigError(FineBuildError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DataError(FineBuildError):
    """Missing or malformed input data (CLI exit code 3)."""


class NumericalError(FineBuildError):
    """Numerical failure during a run (CLI exit code 4)."""


# data
class MissingData(DataError):
    pass


class UnknownClass(DataError):
    pass


class InvalidFoldCount(ConfigError):
    pass


class InvalidFactor(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


class CropTooLarge(ConfigError):
    pass


# diffusion
class InvalidSchedule(ConfigError):
    pass


class ShapeMismatch(FineBuildError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class InvalidGamma(FineBuildError):
    pass


class InvalidStep(FineBuildError):
    pass


class ScheduleMismatch(ConfigError):
    pass


class DegenerateStats(NumericalError):
    pass


# cibm
class TeacherInputMismatch(FineBuildError):
    pass


class EmptyClass(DataError):
    pass


class DegenerateWeights(FineBuildError):
    pass


# classifier
class IndexOutOfRange(FineBuildError):
    pass


class InvalidAlpha(ConfigError):
    pass


class ConfigMismatch(ConfigError):
    pass


class InputSizeMismatch(FineBuildError):
    pass


# metrics
class RankTooShort(FineBuildError):
    pass


class LengthMismatch(FineBuildError):
    pass
