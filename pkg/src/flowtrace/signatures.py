"""Signature rule catalog, per-packet and stream detectors, frequency table.

Each catalog rule names a known attack, carries the set of static header
parameters its signature rests on, and, for the runtime subset, an
executable check. Three entries (brkill, tcp_hijack, oob_data_barf) would
need full TCP stream reconstruction to detect and are catalog metadata only:
they contribute parameter frequencies but never alerts.

Stateless rules are pure functions of one decoded packet. Stateful detectors
(SYN flood, fragment overlap/bonk, scan sweeps) consume the stream in
timestamp order and keep bounded state: sliding windows, an LRU fragment
cache, per-source port sets.
"""

from __future__ import annotations

import csv
import enum
import json
from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import IO, Callable, Iterable

from .capture import ParsedHeaders, format_addr
from .errors import OutOfOrder
from .parameters import ParameterId

P = ParameterId


class RuleKind(enum.Enum):
    STATELESS = "stateless"
    STATEFUL = "stateful"


@dataclass(frozen=True)
class DetectionConfig:
    """Tunables shared by the detectors.

    netmask_prefix defines which destination addresses count as directed
    broadcasts (host bits all ones). syn_k/syn_w bound the SYN-flood sliding
    window; scan_k/scan_w bound the port-sweep aggregation.
    """

    netmask_prefix: int = 24
    syn_k: int = 100
    syn_w: float = 5.0
    scan_k: int = 20
    scan_w: float = 5.0
    fragment_cache_size: int = 4096
    flow_cache_size: int = 65536
    out_of_order_tolerance_us: int = 1000


DEFAULT_CONFIG = DetectionConfig()


@dataclass(frozen=True)
class SignatureRule:
    """One catalog entry.

    predicate is None for stateful rules (their logic lives in StreamScanner)
    and for metadata-only entries; ``runtime`` says whether any detector can
    emit alerts for this rule.
    """

    name: str
    parameters_used: frozenset[ParameterId]
    kind: RuleKind
    predicate: Callable[[ParsedHeaders, DetectionConfig], bool] | None
    runtime: bool
    description: str = ""


@dataclass(frozen=True)
class Alert:
    rule_name: str
    ts_us: int
    src_addr: int
    dst_addr: int
    detail: str = ""


def alert_to_dict(alert: Alert) -> dict:
    return {
        "rule": alert.rule_name,
        "ts_us": alert.ts_us,
        "src": format_addr(alert.src_addr),
        "dst": format_addr(alert.dst_addr),
        "detail": alert.detail,
    }


def write_alerts_jsonl(alerts: Iterable[Alert], fh: IO[str]) -> None:
    for alert in alerts:
        fh.write(json.dumps(alert_to_dict(alert), sort_keys=True))
        fh.write("\n")


def is_broadcast(addr: int, netmask_prefix: int) -> bool:
    """True when the host bits under the configured prefix are all ones."""
    if not 0 <= netmask_prefix < 32:
        return False
    host_mask = (1 << (32 - netmask_prefix)) - 1
    return (addr & host_mask) == host_mask


_ECHO_SERVICE_PORTS = frozenset({7, 13, 19, 37})  # echo, daytime, chargen, time


def _flags_exactly(tcp, **want: bool) -> bool:
    flags = {"fin": tcp.fin, "syn": tcp.syn, "rst": tcp.rst,
             "psh": tcp.psh, "ack": tcp.ack, "urg": tcp.urg}
    return all(flags[name] is want.get(name, False) for name in flags)


def _land(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return (
        h.ip is not None
        and h.tcp is not None
        and h.ip.src_addr == h.ip.dst_addr
        and h.tcp.src_port == h.tcp.dst_port
    )


def _ack_scan(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return (
        h.tcp is not None
        and _flags_exactly(h.tcp, ack=True)
        and h.tcp.src_port == h.tcp.dst_port
    )


def _fin_scan(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return h.tcp is not None and _flags_exactly(h.tcp, fin=True)


def _synfin_scan(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return h.tcp is not None and h.tcp.syn and h.tcp.fin


def _ip_payload_len(ip) -> int:
    return max(ip.total_length - ip.header_len_bytes, 0)


def _ping_of_death(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    # Oversized-on-reassembly ICMP datagram: the final byte implied by this
    # fragment (or whole packet) exceeds the 65535 IP maximum.
    ip = h.ip
    if ip is None or ip.protocol != 1:
        return False
    return ip.fragment_offset * 8 + _ip_payload_len(ip) > 65535


def _smurf(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return (
        h.icmp is not None
        and h.icmp.type == 8
        and h.ip is not None
        and is_broadcast(h.ip.dst_addr, cfg.netmask_prefix)
    )


def _fraggle(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return (
        h.udp is not None
        and h.ip is not None
        and is_broadcast(h.ip.dst_addr, cfg.netmask_prefix)
        and h.udp.dst_port in (7, 19)
    )


def _pingpong(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return (
        h.udp is not None
        and h.udp.src_port in _ECHO_SERVICE_PORTS
        and h.udp.dst_port in _ECHO_SERVICE_PORTS
    )


def _oob_bug(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    return h.tcp is not None and h.tcp.urg and h.tcp.dst_port == 139


def _unaligned_ts(h: ParsedHeaders, cfg: DetectionConfig) -> bool:
    # Walk the IP options; a timestamp option (type 68) whose length is not
    # 4 + 8k cannot hold whole (address, timestamp) entries.
    if h.ip is None or not h.ip.options:
        return False
    opts = h.ip.options
    i = 0
    while i < len(opts):
        kind = opts[i]
        if kind == 0:  # end of options
            break
        if kind == 1:  # no-op pad
            i += 1
            continue
        if i + 1 >= len(opts):
            break
        length = opts[i + 1]
        if length < 2:
            break
        if kind == 68 and (length < 4 or (length - 4) % 8 != 0):
            return True
        i += length
    return False


def builtin_catalog() -> list[SignatureRule]:
    """The built-in attack catalog.

    parameters_used records which static header parameters each signature
    keys on; across the catalog the per-parameter totals are the published
    frequency-of-use table reproduced by frequency_table().
    """
    return [
        SignatureRule(
            "smurf", frozenset({P.IP_DST, P.ICMP_TYPE, P.ICMP_CODE}),
            RuleKind.STATELESS, _smurf, True,
            "ICMP echo request addressed to a directed broadcast",
        ),
        SignatureRule(
            "fraggle", frozenset({P.IP_DST, P.UDP_DPORT}),
            RuleKind.STATELESS, _fraggle, True,
            "UDP to a directed broadcast on the echo/chargen ports",
        ),
        SignatureRule(
            "pingpong", frozenset({P.UDP_SPORT, P.UDP_DPORT}),
            RuleKind.STATELESS, _pingpong, True,
            "UDP looped between two small-service ports",
        ),
        SignatureRule(
            "ping_of_death", frozenset({P.IP_MF_FLAG, P.ICMP_TYPE, P.ICMP_CODE}),
            RuleKind.STATELESS, _ping_of_death, True,
            "ICMP fragment whose reassembled datagram would exceed 65535 bytes",
        ),
        SignatureRule(
            "fragment_overlap", frozenset({P.IP_MF_FLAG, P.IP_DF_FLAG}),
            RuleKind.STATEFUL, None, True,
            "IP fragment overlapping an earlier fragment of the same datagram",
        ),
        SignatureRule(
            "brkill", frozenset({P.TCP_RST}),
            RuleKind.STATEFUL, None, False,
            "Forged RST connection killing; needs stream reconstruction, catalog metadata only",
        ),
        SignatureRule(
            "land", frozenset({P.IP_SRC, P.IP_DST, P.TCP_SPORT, P.TCP_DPORT}),
            RuleKind.STATELESS, _land, True,
            "TCP packet whose source equals its destination, port included",
        ),
        SignatureRule(
            "syn_flood", frozenset({P.TCP_SYN}),
            RuleKind.STATEFUL, None, True,
            "Excess of un-acknowledged SYNs to one destination and port",
        ),
        SignatureRule(
            "tcp_hijack", frozenset({P.TCP_ACK}),
            RuleKind.STATEFUL, None, False,
            "Session takeover; needs stream reconstruction, catalog metadata only",
        ),
        SignatureRule(
            "oob_bug", frozenset({P.TCP_URG}),
            RuleKind.STATELESS, _oob_bug, True,
            "TCP urgent data aimed at the NetBIOS session port",
        ),
        SignatureRule(
            "unaligned_ts", frozenset({P.IP_OPTIONS_LEN}),
            RuleKind.STATELESS, _unaligned_ts, True,
            "IP timestamp option with a length no whole entry count can produce",
        ),
        SignatureRule(
            "bonk", frozenset({P.IP_DF_FLAG}),
            RuleKind.STATEFUL, None, True,
            "UDP fragment with MF set overlapping an earlier fragment",
        ),
        SignatureRule(
            "oob_data_barf", frozenset({P.IP_LENGTH}),
            RuleKind.STATELESS, None, False,
            "Malformed out-of-band payload; needs stream reconstruction, catalog metadata only",
        ),
        SignatureRule(
            "fin_scan", frozenset({P.TCP_FIN}),
            RuleKind.STATELESS, _fin_scan, True,
            "TCP probe carrying the FIN flag alone",
        ),
        SignatureRule(
            "synfin_scan", frozenset({P.TCP_SYN}),
            RuleKind.STATELESS, _synfin_scan, True,
            "TCP probe carrying SYN and FIN together",
        ),
        SignatureRule(
            "ack_scan", frozenset({P.TCP_ACK}),
            RuleKind.STATELESS, _ack_scan, True,
            "Lone ACK flag with identical source and destination ports",
        ),
    ]


def evaluate_stateless(
    rules: Iterable[SignatureRule],
    headers: ParsedHeaders,
    ts_us: int,
    config: DetectionConfig = DEFAULT_CONFIG,
) -> list[Alert]:
    """Run every stateless predicate against one packet; one Alert per match."""
    alerts: list[Alert] = []
    for rule in rules:
        if rule.predicate is None:
            continue
        if rule.predicate(headers, config):
            ip = headers.ip
            alerts.append(
                Alert(
                    rule_name=rule.name,
                    ts_us=ts_us,
                    src_addr=ip.src_addr if ip else 0,
                    dst_addr=ip.dst_addr if ip else 0,
                    detail=_stateless_detail(rule.name, headers),
                )
            )
    return alerts


def _stateless_detail(name: str, h: ParsedHeaders) -> str:
    if h.tcp is not None:
        return f"sport={h.tcp.src_port} dport={h.tcp.dst_port}"
    if h.udp is not None:
        return f"sport={h.udp.src_port} dport={h.udp.dst_port}"
    if h.ip is not None:
        return f"frag_offset={h.ip.fragment_offset} total_length={h.ip.total_length}"
    return ""


class _SynFloodDetector:
    """Sliding-window net-SYN counter per (dst_addr, dst_port).

    A handshake completion (SYN, answering SYN/ACK, final pure ACK on the
    same flow) cancels one SYN inside the window, so benign churn stays near
    zero while spoofed floods climb. One alert per threshold crossing, then
    silence for the rest of that window.
    """

    def __init__(self, config: DetectionConfig):
        self._cfg = config
        self._w_us = round(config.syn_w * 1e6)
        self._syns: dict[tuple[int, int], deque[int]] = {}
        self._done: dict[tuple[int, int], deque[int]] = {}
        self._flows: OrderedDict[tuple[int, int, int, int], str] = OrderedDict()
        self._quiet_until: dict[tuple[int, int], int] = {}

    def _touch_flow(self, key: tuple[int, int, int, int], state: str) -> None:
        self._flows[key] = state
        self._flows.move_to_end(key)
        while len(self._flows) > self._cfg.flow_cache_size:
            self._flows.popitem(last=False)

    def feed(self, ts: int, h: ParsedHeaders) -> Alert | None:
        if h.tcp is None or h.ip is None:
            return None
        tcp, ip = h.tcp, h.ip
        flow = (ip.src_addr, tcp.src_port, ip.dst_addr, tcp.dst_port)
        target = (ip.dst_addr, tcp.dst_port)
        crossing_candidate = False
        if tcp.syn and not tcp.ack:
            self._syns.setdefault(target, deque()).append(ts)
            self._touch_flow(flow, "syn")
            crossing_candidate = True
        elif tcp.syn and tcp.ack:
            orig = (ip.dst_addr, tcp.dst_port, ip.src_addr, tcp.src_port)
            if self._flows.get(orig) == "syn":
                self._touch_flow(orig, "synack")
        elif tcp.ack and not (tcp.fin or tcp.rst):
            if self._flows.get(flow) == "synack":
                self._touch_flow(flow, "done")
                self._done.setdefault(target, deque()).append(ts)
        if not crossing_candidate:
            return None
        horizon = ts - self._w_us
        syns = self._syns[target]
        while syns and syns[0] <= horizon:
            syns.popleft()
        done = self._done.get(target)
        while done and done[0] <= horizon:
            done.popleft()
        net = len(syns) - (len(done) if done else 0)
        if net > self._cfg.syn_k and self._quiet_until.get(target, -1) <= ts:
            self._quiet_until[target] = ts + self._w_us
            return Alert(
                rule_name="syn_flood",
                ts_us=ts,
                src_addr=ip.src_addr,
                dst_addr=ip.dst_addr,
                detail=f"net_syns={net} dport={tcp.dst_port} window_s={self._cfg.syn_w}",
            )
        return None


class _FragmentTracker:
    """LRU cache of fragment byte ranges keyed by (src, dst, protocol, ip id).

    Serves both the generic overlap rule and bonk (overlap by a UDP fragment
    that still has MF set).
    """

    def __init__(self, config: DetectionConfig):
        self._cfg = config
        self._cache: OrderedDict[tuple[int, int, int, int], list[tuple[int, int]]] = OrderedDict()

    def feed(self, ts: int, h: ParsedHeaders) -> list[Alert]:
        ip = h.ip
        if ip is None or not (ip.mf or ip.fragment_offset > 0):
            return []
        length = _ip_payload_len(ip)
        if length == 0:
            return []
        start = ip.fragment_offset * 8
        end = start + length
        key = (ip.src_addr, ip.dst_addr, ip.protocol, ip.identification)
        ranges = self._cache.get(key)
        alerts: list[Alert] = []
        if ranges is not None:
            hit = next(((a, b) for a, b in ranges if start < b and a < end), None)
            if hit is not None:
                detail = (
                    f"ip_id={ip.identification} range=[{start},{end}) "
                    f"overlaps [{hit[0]},{hit[1]})"
                )
                alerts.append(Alert("fragment_overlap", ts, ip.src_addr, ip.dst_addr, detail))
                if ip.protocol == 17 and ip.mf:
                    alerts.append(Alert("bonk", ts, ip.src_addr, ip.dst_addr, detail))
        if ranges is None:
            ranges = []
            self._cache[key] = ranges
        ranges.append((start, end))
        self._cache.move_to_end(key)
        while len(self._cache) > self._cfg.fragment_cache_size:
            self._cache.popitem(last=False)
        return alerts


class _SweepDetector:
    """Distinct-destination-port sweep aggregation for one scan rule."""

    def __init__(self, base_rule: SignatureRule, config: DetectionConfig):
        self._rule = base_rule
        self._cfg = config
        self._w_us = round(config.scan_w * 1e6)
        self._probes: dict[int, deque[tuple[int, int]]] = {}
        self._quiet_until: dict[int, int] = {}

    def feed(self, ts: int, h: ParsedHeaders) -> Alert | None:
        if h.ip is None or not self._rule.predicate(h, self._cfg):
            return None
        src = h.ip.src_addr
        probes = self._probes.setdefault(src, deque())
        probes.append((ts, h.tcp.dst_port))
        horizon = ts - self._w_us
        while probes and probes[0][0] <= horizon:
            probes.popleft()
        distinct = len({port for _, port in probes})
        if distinct > self._cfg.scan_k and self._quiet_until.get(src, -1) <= ts:
            self._quiet_until[src] = ts + self._w_us
            return Alert(
                rule_name=f"{self._rule.name}_sweep",
                ts_us=ts,
                src_addr=src,
                dst_addr=h.ip.dst_addr,
                detail=f"distinct_ports={distinct} window_s={self._cfg.scan_w}",
            )
        return None


class StreamScanner:
    """Stateful detectors over a timestamp-ordered packet stream.

    Emits syn_flood, fragment_overlap, and bonk alerts, plus one
    ``<rule>_sweep`` summary alert when a single source probes more than
    scan_k distinct ports within scan_w seconds with ack/fin/synfin scan
    packets. Raises OutOfOrder when a timestamp regresses beyond tolerance.
    """

    def __init__(
        self,
        catalog: list[SignatureRule] | None = None,
        config: DetectionConfig = DEFAULT_CONFIG,
    ):
        catalog = builtin_catalog() if catalog is None else catalog
        by_name = {rule.name: rule for rule in catalog}
        self._cfg = config
        self._last_ts: int | None = None
        self._synflood = _SynFloodDetector(config) if "syn_flood" in by_name else None
        track_frags = "fragment_overlap" in by_name or "bonk" in by_name
        self._frags = _FragmentTracker(config) if track_frags else None
        self._frag_rules = {
            name for name in ("fragment_overlap", "bonk") if name in by_name
        }
        self._sweeps = [
            _SweepDetector(by_name[name], config)
            for name in ("ack_scan", "fin_scan", "synfin_scan")
            if name in by_name and by_name[name].predicate is not None
        ]

    def feed(self, ts_us: int, headers: ParsedHeaders) -> list[Alert]:
        if self._last_ts is not None and ts_us < self._last_ts - self._cfg.out_of_order_tolerance_us:
            raise OutOfOrder(
                f"timestamp {ts_us} regresses {self._last_ts - ts_us} us behind the stream"
            )
        self._last_ts = max(ts_us, self._last_ts or ts_us)
        alerts: list[Alert] = []
        if self._synflood is not None:
            hit = self._synflood.feed(ts_us, headers)
            if hit is not None:
                alerts.append(hit)
        if self._frags is not None:
            alerts.extend(
                a for a in self._frags.feed(ts_us, headers) if a.rule_name in self._frag_rules
            )
        for sweep in self._sweeps:
            hit = sweep.feed(ts_us, headers)
            if hit is not None:
                alerts.append(hit)
        return alerts


def evaluate_stateful(
    stream: Iterable[tuple[int, ParsedHeaders]],
    config: DetectionConfig = DEFAULT_CONFIG,
    catalog: list[SignatureRule] | None = None,
) -> list[Alert]:
    """Run the stateful detectors over a whole stream and collect alerts."""
    scanner = StreamScanner(catalog, config)
    alerts: list[Alert] = []
    for ts, headers in stream:
        alerts.extend(scanner.feed(ts, headers))
    return alerts


def scan_packets(
    stream: Iterable[tuple[int, ParsedHeaders]],
    catalog: list[SignatureRule] | None = None,
    config: DetectionConfig = DEFAULT_CONFIG,
) -> list[Alert]:
    """Full scan: stateless rules per packet plus the stateful detectors."""
    catalog = builtin_catalog() if catalog is None else catalog
    scanner = StreamScanner(catalog, config)
    alerts: list[Alert] = []
    for ts, headers in stream:
        alerts.extend(evaluate_stateless(catalog, headers, ts, config))
        alerts.extend(scanner.feed(ts, headers))
    return alerts


@dataclass(frozen=True)
class FrequencyRow:
    number: int
    protocol: str
    parameter: str
    parameter_id: ParameterId
    frequency: int


@dataclass(frozen=True)
class FrequencyTable:
    rows: tuple[FrequencyRow, ...]


# Canonical row layout of the parameter frequency-of-use table.
_TABLE_LAYOUT: tuple[tuple[int, str, str, ParameterId], ...] = (
    (1, "IP", "Destination IP Address", P.IP_DST),
    (2, "IP", "Source IP Address", P.IP_SRC),
    (3, "IP", "Length", P.IP_LENGTH),
    (4, "IP", "More Fragment Flag", P.IP_MF_FLAG),
    (5, "IP", "Don't Fragment Flag", P.IP_DF_FLAG),
    (6, "IP", "Options", P.IP_OPTIONS_LEN),
    (7, "TCP", "Source Port", P.TCP_SPORT),
    (8, "TCP", "Destination Port", P.TCP_DPORT),
    (9, "TCP", "Urgent Flag", P.TCP_URG),
    (10, "TCP", "RST Flag", P.TCP_RST),
    (11, "TCP", "ACK Flag", P.TCP_ACK),
    (12, "TCP", "SYN Flag", P.TCP_SYN),
    (13, "TCP", "FIN Flag", P.TCP_FIN),
    (14, "UDP", "Destination Port", P.UDP_DPORT),
    (15, "UDP", "Source Port", P.UDP_SPORT),
    (16, "ICMP", "Type", P.ICMP_TYPE),
    (17, "ICMP", "Code", P.ICMP_CODE),
)


def frequency_table(catalog: list[SignatureRule] | None = None) -> FrequencyTable:
    """Count, per parameter, how many catalog rules use it in their signature."""
    catalog = builtin_catalog() if catalog is None else catalog
    rows = tuple(
        FrequencyRow(
            number=number,
            protocol=protocol,
            parameter=parameter,
            parameter_id=pid,
            frequency=sum(1 for rule in catalog if pid in rule.parameters_used),
        )
        for number, protocol, parameter, pid in _TABLE_LAYOUT
    )
    return FrequencyTable(rows=rows)


FREQUENCY_CSV_FIELDS = ("number", "protocol", "parameter", "frequency")


def write_frequency_csv(table: FrequencyTable, fh: IO[str]) -> None:

    writer = csv.writer(fh)
    writer.writerow(FREQUENCY_CSV_FIELDS)
    for row in table.rows:
        writer.writerow([row.number, row.protocol, row.parameter, row.frequency])
