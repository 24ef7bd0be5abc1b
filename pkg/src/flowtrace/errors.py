"""Error types raised by the flowtrace library.

Every failure mode that callers are expected to handle is a subclass of
FlowtraceError, so ``except FlowtraceError`` at a CLI boundary catches all
data-dependent failures while letting genuine bugs propagate.
"""


class FlowtraceError(Exception):
    """Base class for all library errors."""


class BadMagic(FlowtraceError):
    """File does not start with a recognized classic pcap magic number."""


class Truncated(FlowtraceError):
    """Input ended inside a structure whose layout promised more bytes."""


class UnsupportedLinkType(FlowtraceError):
    """Capture uses a link layer other than Ethernet (linktype 1)."""


class MalformedHeader(FlowtraceError):
    """A decoded header field is structurally impossible (bad version, bad IHL)."""


class InvalidTau(FlowtraceError):
    """Sampling interval is zero, negative, or below timestamp resolution."""


class SeriesTooShort(FlowtraceError):
    """Series has too few samples for the requested embedding."""


class DegenerateSeries(FlowtraceError):
    """Series is constant; neighbor statistics are undefined."""


class BadAxes(FlowtraceError):
    """Projection axes are not 2 or 3 distinct in-range component indices."""


class BadBounds(FlowtraceError):
    """Histogram bounds or bin count are unusable."""


class IncompatibleHistograms(FlowtraceError):
    """Histograms differ in axes, bounds, or bin count and cannot be compared."""


class OutOfOrder(FlowtraceError):
    """Packet stream violated the non-decreasing timestamp requirement."""


class EmptyPlan(FlowtraceError):
    """An analysis plan contains no window specs."""


class PlanStageError(FlowtraceError):
    """A plan stage failed; carries the offending spec label."""

    def __init__(self, label: str, cause: Exception):
        super().__init__(f"[{label}] {type(cause).__name__}: {cause}")
        self.label = label
        self.cause = cause


class UnknownKind(FlowtraceError):
    """Requested attack episode kind has no generator."""


class WriteFailure(FlowtraceError):
    """Output file could not be written."""
