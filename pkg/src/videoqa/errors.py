"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: contract errors exit 2, numeric
errors exit 3, I/O and load errors exit 4.
"""


class VideoQAError(Exception):
    exit_code = 1


class ContractError(VideoQAError):
    """A precondition or argument contract was violated."""

    exit_code = 2


class DimensionError(ContractError):
    pass


class NumericError(VideoQAError):
    """A NaN or Inf appeared where finite values are required."""

    exit_code = 3


class GenerationError(ContractError):
    pass


class RelationUndefinedError(ContractError):
    """A spatial relation was asked about an object that is not visible."""


class AmbiguousReferentError(ContractError):
    """A query step needs exactly one referent but the set has zero or several."""


class LoadError(VideoQAError):
    exit_code = 4


class VersionMismatchError(LoadError):
    pass


class TruncatedPayloadError(LoadError):
    pass


class ChecksumError(LoadError):
    pass
