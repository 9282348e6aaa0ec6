"""Exception hierarchy.

Every error raised by the library derives from :class:`WtdError`.  The three
intermediate classes map onto the CLI exit codes (config 2, data 3,
numeric 4).
"""


class WtdError(Exception):
    exit_code = 1


class ConfigError(WtdError):
    exit_code = 2


class DataError(WtdError):
    exit_code = 3


class NumericError(WtdError):
    exit_code = 4


# grid_core
class CellSizeMismatch(DataError):
    pass


class OffsetTooLarge(DataError):
    pass


class NonDivisibleShape(DataError):
    pass


class InsufficientCoverage(NumericError):
    pass


class AlignmentError(DataError):
    pass


# feature_derivation
class ZeroPrecipitation(DataError):
    pass


class UnknownClassCode(DataError):
    pass


class MissingMandatoryLayer(DataError):
    pass


# well_processor
class EmptySeries(DataError):
    pass


# proxy_builder
class EmptyEligibleSet(DataError):
    pass


# gbdt_engine
class DegenerateData(NumericError):
    pass


class WidthMismatch(DataError):
    pass


# trainer
class EmptyFocus(DataError):
    pass


class UnresolvedPixel(DataError):
    pass


class AllFitsFailed(NumericError):
    pass


class TooFewRecords(DataError):
    pass


# evaluator / stress tester
class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class MissingColumn(DataError):
    pass


class RowMismatch(DataError):
    pass
