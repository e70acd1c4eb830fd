"""
Exceptions raised by hetem.

Everything derives from :class:`HetEMError` so that callers (and the
command line driver) can catch the package's failures in one place.
Where a builtin exception describes the same kind of failure, the
hetem exception also derives from it.
"""


class HetEMError(Exception):

    """
    Base class for all hetem errors.
    """


class ParameterError(HetEMError, ValueError):

    """
    A parameter or configuration value is outside its valid range.
    """


class DimensionError(ParameterError):

    """
    An array has the wrong shape: not square, odd edge length,
    or a mismatch between two inputs that must agree.
    """


class DegeneracyError(HetEMError, ArithmeticError):

    """
    A 6D rotation representation has a zero or parallel pair of vectors.
    """


class DegenerateSignalError(HetEMError):

    """
    A clean projection is identically zero, so no SNR can be reached.
    """


class ScheduleError(HetEMError):

    """
    A training step was requested before the data it depends on exists.
    """


class TrainingDivergenceError(HetEMError, FloatingPointError):

    """
    A loss or network activation became non-finite.
    """

    def __init__(self, message, epoch=None, checkpointPath=None):
        super(TrainingDivergenceError, self).__init__(message)
        self.epoch = epoch
        self.checkpointPath = checkpointPath


class InsufficientDataError(HetEMError):

    """
    Too few items were given for a statistic to be defined.
    """


class DegenerateClusterError(HetEMError):

    """
    All latent vectors are identical, so clustering is meaningless.
    """


class UndefinedCorrelationError(HetEMError):

    """
    A rank correlation was requested against a constant sequence.
    """


class DegenerateStatisticsError(HetEMError):

    """
    A class has zero spread along PC1, so the conformation
    entanglement term cannot be evaluated.
    """


class MrcParseError(HetEMError, ValueError):

    """
    An MRC file could not be parsed. *offset* is the byte offset
    at which the problem was found.
    """

    def __init__(self, path, offset, reason):
        message = "%s: byte offset %d: %s" % (path, offset, reason)
        super(MrcParseError, self).__init__(message)
        self.path = path
        self.offset = offset
        self.reason = reason


class OutputExistsError(HetEMError):

    """
    The output directory exists and is not empty.
    """
