"""Packet-capture analysis toolkit.

flowtrace reads classic pcap captures, decodes Ethernet/IPv4/TCP/UDP/ICMP
headers, turns chosen header parameters into equal-interval time series, and
analyzes those series two ways: geometrically (delay embedding,
false-nearest-neighbor dimension estimation, phase-space occupancy
deviation scoring) and symbolically (a signature-rule catalog with
stateless and stateful detectors). A deterministic traffic generator
produces labeled captures for testing, and a multi-window planner ties the
pieces together across time scales. The ``flowtrace`` CLI exposes each
stage; figure flags render matplotlib plots beside the delimited output.
"""

from .capture import (
    IcmpHeader,
    IpHeader,
    PacketRecord,
    ParsedHeaders,
    PcapFileHeader,
    TcpHeader,
    UdpHeader,
    format_addr,
    load_pcap,
    parse_addr,
    parse_headers,
    read_pcap,
)
from .embedding import (
    DelayVectorSet,
    EmbeddingConfig,
    FnnCurve,
    build_delay_vectors,
    default_delay,
    estimate_dimension,
    fnn_curve,
    fnn_fraction,
)
from .errors import (
    BadAxes,
    BadBounds,
    BadMagic,
    DegenerateSeries,
    EmptyPlan,
    FlowtraceError,
    IncompatibleHistograms,
    InvalidTau,
    MalformedHeader,
    OutOfOrder,
    PlanStageError,
    SeriesTooShort,
    Truncated,
    UnknownKind,
    UnsupportedLinkType,
    WriteFailure,
)
from .multiwindow import (
    PlanResult,
    WindowReport,
    WindowSpec,
    apply_cascade_hints,
    default_plan,
    load_plan,
    run_plan,
)
from .parameters import (
    Aggregator,
    Classification,
    ParameterId,
    ParameterSeries,
    classify,
    classify_field,
    extract,
    read_series_csv,
    sample,
    write_series_csv,
)
from .signatures import (
    Alert,
    DetectionConfig,
    FrequencyTable,
    RuleKind,
    SignatureRule,
    StreamScanner,
    builtin_catalog,
    evaluate_stateful,
    evaluate_stateless,
    frequency_table,
    is_broadcast,
    scan_packets,
)
from .synthgen import AttackEpisode, TrafficProfile, generate, write_pcap
from .trajectory import (
    OccupancyHistogram,
    Projection,
    deviation_score,
    occupancy,
    occupancy_like,
    project,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregator",
    "Alert",
    "AttackEpisode",
    "BadAxes",
    "BadBounds",
    "BadMagic",
    "Classification",
    "DegenerateSeries",
    "DelayVectorSet",
    "DetectionConfig",
    "EmbeddingConfig",
    "EmptyPlan",
    "FlowtraceError",
    "FnnCurve",
    "FrequencyTable",
    "IcmpHeader",
    "IncompatibleHistograms",
    "InvalidTau",
    "IpHeader",
    "MalformedHeader",
    "OccupancyHistogram",
    "OutOfOrder",
    "PacketRecord",
    "ParameterId",
    "ParameterSeries",
    "ParsedHeaders",
    "PcapFileHeader",
    "PlanResult",
    "PlanStageError",
    "Projection",
    "RuleKind",
    "SeriesTooShort",
    "SignatureRule",
    "StreamScanner",
    "TcpHeader",
    "TrafficProfile",
    "Truncated",
    "UdpHeader",
    "UnknownKind",
    "UnsupportedLinkType",
    "WindowReport",
    "WindowSpec",
    "WriteFailure",
    "apply_cascade_hints",
    "build_delay_vectors",
    "builtin_catalog",
    "classify",
    "classify_field",
    "default_delay",
    "default_plan",
    "deviation_score",
    "estimate_dimension",
    "evaluate_stateful",
    "evaluate_stateless",
    "extract",
    "fnn_curve",
    "fnn_fraction",
    "format_addr",
    "frequency_table",
    "generate",
    "is_broadcast",
    "load_pcap",
    "load_plan",
    "occupancy",
    "occupancy_like",
    "parse_addr",
    "parse_headers",
    "project",
    "read_pcap",
    "read_series_csv",
    "run_plan",
    "sample",
    "scan_packets",
    "write_pcap",
    "write_series_csv",
]
