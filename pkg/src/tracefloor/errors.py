"""Exception types raised across the toolkit."""


class TracefloorError(Exception):
    """Base class for all toolkit errors."""


# -- trace parsing ----------------------------------------------------------

class MalformedRecord(TracefloorError):
    """A JSONL record fails the wire schema or a field invariant."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class NonMonotonicTime(TracefloorError):
    """Two samples of the same kind share a timestamp."""


class EmptyTrace(TracefloorError):
    """The trace contains no sensor samples."""


# -- signal processing ------------------------------------------------------

class NoAccelData(TracefloorError):
    """Operation needs accelerometer samples and the trace has none."""


class NoMagData(TracefloorError):
    """Operation needs compass samples and the trace has none."""


class ZeroActual(TracefloorError):
    """Step-count error is undefined for a non-positive actual count."""


# -- dead reckoning ---------------------------------------------------------

class UnsortedAnchors(TracefloorError):
    """Anchor sequence is not sorted by time."""


# -- grid map ---------------------------------------------------------------

class OutOfGrid(TracefloorError):
    """A position falls outside the grid extent."""


class TraceIdMismatch(TracefloorError):
    """Track and trace do not refer to the same walk."""


class EmptyBlock(TracefloorError):
    """Feature extraction needs a visited block with accel data."""


# -- classifier -------------------------------------------------------------

class EmptyCounts(TracefloorError):
    """Entropy of an empty class-count vector is undefined."""


class DegenerateSplit(TracefloorError):
    """A candidate split leaves one side empty."""


class EmptyTrainingSet(TracefloorError):
    """Training needs at least one labeled example."""


class EmptyTestSet(TracefloorError):
    """Evaluation needs at least one labeled example."""


# -- fingerprint locator ----------------------------------------------------

class EmptyDatabase(TracefloorError):
    """Location query against a fingerprint database with no blocks."""


class EmptyScan(TracefloorError):
    """Location query needs at least one AP reading."""


# -- simulator --------------------------------------------------------------

class InfeasibleLayout(TracefloorError):
    """World extent too small to place all four area classes."""


# -- CLI --------------------------------------------------------------------

class EmptyGrid(TracefloorError):
    """Rendering needs a grid with at least one block."""


class UsageError(TracefloorError):
    """Bad command-line flags or config keys (exit status 2)."""


class DataError(TracefloorError):
    """Input file violates its format (exit status 1)."""
