"""Exception hierarchy shared across the pipeline.

Three failure buckets map onto the CLI exit codes: configuration (bad
options or schedules), data (malformed or empty inputs), and runtime
(numerical blow-ups, missing probers).
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PipelineError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class RuntimeFailure(PipelineError):
    exit_code = 4


# -- address / corpus ------------------------------------------------------

class MalformedAddress(DataError):
    pass


class MalformedPrefix(DataError):
    pass


class MalformedResultLine(DataError):
    pass


class EmptyCorpus(DataError):
    pass


# -- schedule / model / training ------------------------------------------

class InvalidSchedule(ConfigurationError):
    pass


class StepOutOfRange(RuntimeFailure):
    pass


class InvalidWindow(ConfigurationError):
    pass


class ShapeMismatch(RuntimeFailure):
    pass


class NonFiniteLoss(RuntimeFailure):
    pass


class InvalidStride(ConfigurationError):
    pass


# -- probing / evaluation ---------------------------------------------------

class ProberUnavailable(RuntimeFailure):
    pass


class EmptyCandidateSet(DataError):
    pass
