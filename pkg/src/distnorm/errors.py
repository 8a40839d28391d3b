"""Exception hierarchy shared by every module in the package.

Three broad families, matching the CLI exit codes: configuration and
precondition failures (exit 2), on-disk format problems (exit 3), and
non-finite numerics (exit 4).
"""


class EngineError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EngineError):
    """Invalid configuration, arguments, or violated preconditions."""


class StoreError(EngineError):
    """Malformed or inconsistent on-disk data."""


class NumericError(EngineError):
    """Non-finite values where finite ones are required."""


# -- configuration / precondition failures ----------------------------------


class InvalidConfig(ConfigError):
    pass


class NonPositiveTau(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class ZeroNormRow(ConfigError):
    def __init__(self, row_id: str):
        self.row_id = row_id
        super().__init__(f"row {row_id!r} has (near-)zero norm and cannot be normalized")


class EmptySet(ConfigError):
    pass


class SampleSizeOutOfRange(ConfigError):
    pass


class EmptyNegativeSet(ConfigError):
    pass


class EmptyReferences(ConfigError):
    pass


class MissingLink(ConfigError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"query {query_id!r} has no usable ground-truth links")


class UnknownLabel(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class DegenerateInput(ConfigError):
    pass


class MissingPreferencePairs(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


# -- on-disk format problems -------------------------------------------------


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class UnsupportedDtype(StoreError):
    pass


class TruncatedPayload(StoreError):
    pass


class RowCountMismatch(StoreError):
    pass


class ParseError(StoreError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DanglingId(StoreError):
    pass


class DuplicateRow(StoreError):
    pass


# -- numerics ----------------------------------------------------------------


class NonFiniteInput(NumericError):
    pass


class NonFiniteScore(NumericError):
    pass
