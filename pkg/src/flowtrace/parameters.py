"""Header parameter classification, extraction, and equal-interval sampling.

A parameter is usable for phase-space analysis only if it is static: its
value is a property of the traffic itself, not of the observation point.
Hop-dependent fields (MAC addresses, TTL, checksums) are dynamic and are
deliberately not members of ParameterId; they live in the exclusion table.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .capture import ParsedHeaders
from .errors import InvalidTau


class Classification(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class ParameterId(enum.Enum):
    """Numerically extractable static header parameters."""

    IP_PROTOCOL = "ip_protocol"
    IP_SRC = "ip_src"
    IP_DST = "ip_dst"
    IP_LENGTH = "ip_length"
    IP_MF_FLAG = "ip_mf_flag"
    IP_DF_FLAG = "ip_df_flag"
    IP_OPTIONS_LEN = "ip_options_len"
    IP_FRAG_OFFSET = "ip_frag_offset"
    IP_ID = "ip_id"
    TCP_SPORT = "tcp_sport"
    TCP_DPORT = "tcp_dport"
    TCP_URG = "tcp_urg"
    TCP_RST = "tcp_rst"
    TCP_ACK = "tcp_ack"
    TCP_SYN = "tcp_syn"
    TCP_FIN = "tcp_fin"
    TCP_SEQ = "tcp_seq"
    UDP_SPORT = "udp_sport"
    UDP_DPORT = "udp_dport"
    ICMP_TYPE = "icmp_type"
    ICMP_CODE = "icmp_code"


# Header fields excluded from ParameterId because they vary with the
# observation point or the path rather than with the traffic.
DYNAMIC_HEADER_FIELDS = frozenset(
    {"eth_src", "eth_dst", "ip_ttl", "ip_checksum", "tcp_checksum", "udp_checksum", "icmp_checksum"}
)


def classify(parameter: ParameterId) -> Classification:
    """Every ParameterId member is static; dynamic fields are not members."""
    if not isinstance(parameter, ParameterId):
        raise TypeError(f"expected ParameterId, got {type(parameter).__name__}")
    return Classification.STATIC


def classify_field(name: str) -> Classification:
    """Classify a raw header field name, covering the dynamic exclusion table."""
    if name in DYNAMIC_HEADER_FIELDS:
        return Classification.DYNAMIC
    try:
        ParameterId(name)
    except ValueError:
        raise KeyError(f"unknown header field {name!r}") from None
    return Classification.STATIC


def extract(headers: ParsedHeaders, parameter: ParameterId) -> float | None:
    """Pull one parameter from a decoded packet as a float.

    Returns None when the carrying protocol is absent (e.g. TCP_DPORT of a
    UDP packet); flags map to 0.0/1.0 and addresses to their 32-bit unsigned
    value.
    """
    ip, tcp, udp, icmp = headers.ip, headers.tcp, headers.udp, headers.icmp
    p = ParameterId(parameter)
    if p in _IP_EXTRACTORS:
        return None if ip is None else float(_IP_EXTRACTORS[p](ip))
    if p in _TCP_EXTRACTORS:
        return None if tcp is None else float(_TCP_EXTRACTORS[p](tcp))
    if p in _UDP_EXTRACTORS:
        return None if udp is None else float(_UDP_EXTRACTORS[p](udp))
    return None if icmp is None else float(_ICMP_EXTRACTORS[p](icmp))


_IP_EXTRACTORS = {
    ParameterId.IP_PROTOCOL: lambda ip: ip.protocol,
    ParameterId.IP_SRC: lambda ip: ip.src_addr,
    ParameterId.IP_DST: lambda ip: ip.dst_addr,
    ParameterId.IP_LENGTH: lambda ip: ip.total_length,
    ParameterId.IP_MF_FLAG: lambda ip: int(ip.mf),
    ParameterId.IP_DF_FLAG: lambda ip: int(ip.df),
    ParameterId.IP_OPTIONS_LEN: lambda ip: len(ip.options),
    ParameterId.IP_FRAG_OFFSET: lambda ip: ip.fragment_offset,
    ParameterId.IP_ID: lambda ip: ip.identification,
}

_TCP_EXTRACTORS = {
    ParameterId.TCP_SPORT: lambda t: t.src_port,
    ParameterId.TCP_DPORT: lambda t: t.dst_port,
    ParameterId.TCP_URG: lambda t: int(t.urg),
    ParameterId.TCP_RST: lambda t: int(t.rst),
    ParameterId.TCP_ACK: lambda t: int(t.ack),
    ParameterId.TCP_SYN: lambda t: int(t.syn),
    ParameterId.TCP_FIN: lambda t: int(t.fin),
    ParameterId.TCP_SEQ: lambda t: t.seq,
}

_UDP_EXTRACTORS = {
    ParameterId.UDP_SPORT: lambda u: u.src_port,
    ParameterId.UDP_DPORT: lambda u: u.dst_port,
}

_ICMP_EXTRACTORS = {
    ParameterId.ICMP_TYPE: lambda i: i.type,
    ParameterId.ICMP_CODE: lambda i: i.code,
}


class Aggregator(enum.Enum):
    LAST = "last"
    MEAN = "mean"
    COUNT = "count"
    SUM = "sum"


@dataclass
class ParameterSeries:
    """Equal-interval numeric series sampled from a packet stream.

    ``values[n]`` summarizes packets with timestamps in
    [t0 + n*tau, t0 + (n+1)*tau). parameter/aggregator are None for series
    loaded back from CSV, where only the numbers survive.
    """

    parameter: ParameterId | None
    tau: float
    t0_us: int
    values: np.ndarray
    aggregator: Aggregator | None = Aggregator.LAST

    def __len__(self) -> int:
        return len(self.values)

    @property
    def tau_us(self) -> int:
        return _tau_to_us(self.tau)


def _tau_to_us(tau: float) -> int:
    if not tau > 0:
        raise InvalidTau(f"tau must be positive, got {tau}")
    tau_us = round(tau * 1e6)
    if tau_us <= 0:
        raise InvalidTau(f"tau {tau} is below microsecond resolution")
    return tau_us


def sample(
    packets: Iterable[tuple[int, ParsedHeaders]],
    parameter: ParameterId,
    tau: float,
    aggregator: Aggregator = Aggregator.LAST,
    fill: float = 0.0,
) -> ParameterSeries:
    """Sample one parameter into an equal-interval series.

    packets are (timestamp_us, headers) pairs in any order; sorting is
    internal, with equal timestamps ordered by value so that the result never
    depends on input permutation. Bins where no packet carries the parameter
    hold ``fill``. The bin count is floor((t_last - t0)/tau) + 1, so the last
    packet always lands in the final bin even on an exact bin boundary.
    """
    tau_us = _tau_to_us(tau)
    aggregator = Aggregator(aggregator)
    extracted: list[tuple[int, float]] = []
    t_min: int | None = None
    t_max: int | None = None
    for ts, headers in packets:
        t_min = ts if t_min is None else min(t_min, ts)
        t_max = ts if t_max is None else max(t_max, ts)
        value = extract(headers, parameter)
        if value is not None:
            extracted.append((ts, value))
    if t_min is None:
        return ParameterSeries(parameter, tau, 0, np.zeros(0, dtype=float), aggregator)

    n_bins = (t_max - t_min) // tau_us + 1
    values = np.full(n_bins, float(fill), dtype=float)
    extracted.sort()  # (ts, value): value breaks timestamp ties deterministically

    counts = np.zeros(n_bins, dtype=np.int64)
    sums = np.zeros(n_bins, dtype=float)
    lasts = np.empty(n_bins, dtype=float)
    for ts, value in extracted:
        n = (ts - t_min) // tau_us
        counts[n] += 1
        sums[n] += value
        lasts[n] = value

    occupied = counts > 0
    if aggregator is Aggregator.LAST:
        values[occupied] = lasts[occupied]
    elif aggregator is Aggregator.MEAN:
        values[occupied] = sums[occupied] / counts[occupied]
    elif aggregator is Aggregator.COUNT:
        values[occupied] = counts[occupied]
    else:
        values[occupied] = sums[occupied]
    return ParameterSeries(parameter, tau, t_min, values, aggregator)


SERIES_CSV_FIELDS = ("n", "t_start_us", "value")


def write_series_csv(series: ParameterSeries, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(SERIES_CSV_FIELDS)
    tau_us = series.tau_us
    for n, value in enumerate(series.values):
        writer.writerow([n, series.t0_us + n * tau_us, repr(float(value))])


def read_series_csv(fh: IO[str]) -> ParameterSeries:
    """Load a series written by write_series_csv; parameter identity is lost."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(SERIES_CSV_FIELDS):
        raise ValueError(f"expected series CSV header {SERIES_CSV_FIELDS}, got {header}")
    starts: list[int] = []
    vals: list[float] = []
    for row in reader:
        if not row:
            continue
        starts.append(int(row[1]))
        vals.append(float(row[2]))
    if len(starts) >= 2:
        tau = (starts[1] - starts[0]) / 1e6
    else:
        tau = 1.0
    t0 = starts[0] if starts else 0
    return ParameterSeries(None, tau, t0, np.asarray(vals, dtype=float), None)
