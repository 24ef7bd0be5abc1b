"""Shared raw-byte frame and pcap builders for the test suite.

Everything here is assembled with struct.pack directly from the wire
layouts, independent of the library's own synthgen builders, so that
decoding tests never trust the code under test.
"""

from __future__ import annotations

import struct

import pytest

from flowtrace.capture import parse_headers


def ip_int(dotted: str) -> int:
    a, b, c, d = (int(x) for x in dotted.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d


def eth_frame(payload: bytes = b"", ethertype: int = 0x0800,
              dst: bytes = b"\xaa" * 6, src: bytes = b"\xbb" * 6) -> bytes:
    return dst + src + struct.pack("!H", ethertype) + payload


def ipv4_header(
    *,
    src: str = "10.0.0.1",
    dst: str = "10.0.0.2",
    proto: int = 6,
    total_length: int | None = None,
    payload_len: int = 0,
    identification: int = 0,
    df: bool = False,
    mf: bool = False,
    frag_offset: int = 0,
    ttl: int = 64,
    options: bytes = b"",
    version: int = 4,
    ihl: int | None = None,
) -> bytes:
    if len(options) % 4:
        raise ValueError("options must pad to a 4-byte multiple")
    header_len = 20 + len(options)
    if ihl is None:
        ihl = header_len // 4
    if total_length is None:
        total_length = header_len + payload_len
    flags_frag = (0x4000 if df else 0) | (0x2000 if mf else 0) | (frag_offset & 0x1FFF)
    return (
        struct.pack(
            "!BBHHHBBHII",
            (version << 4) | ihl,
            0,
            total_length,
            identification,
            flags_frag,
            ttl,
            proto,
            0,
            ip_int(src),
            ip_int(dst),
        )
        + options
    )


def tcp_header(
    *,
    sport: int = 12345,
    dport: int = 80,
    seq: int = 0,
    ack_num: int = 0,
    flags: int = 0x02,
    window: int = 8192,
    urgent_ptr: int = 0,
    data_offset: int = 5,
) -> bytes:
    return struct.pack(
        "!HHIIHHHH",
        sport,
        dport,
        seq,
        ack_num,
        (data_offset << 12) | (flags & 0x3F),
        window,
        0,
        urgent_ptr,
    )


def udp_header(*, sport: int = 5353, dport: int = 53, length: int = 8) -> bytes:
    return struct.pack("!HHHH", sport, dport, length, 0)


def icmp_header(*, icmp_type: int = 8, code: int = 0) -> bytes:
    return struct.pack("!BBH", icmp_type, code, 0)


def tcp_frame(**kw) -> bytes:
    ip_kw = {k: v for k, v in kw.items() if k in {
        "src", "dst", "identification", "df", "mf", "frag_offset", "ttl",
        "options", "total_length",
    }}
    tcp_kw = {k: v for k, v in kw.items() if k in {
        "sport", "dport", "seq", "ack_num", "flags", "window", "urgent_ptr",
    }}
    transport = tcp_header(**tcp_kw)
    return eth_frame(ipv4_header(proto=6, payload_len=len(transport), **ip_kw) + transport)


def udp_frame(**kw) -> bytes:
    ip_kw = {k: v for k, v in kw.items() if k in {
        "src", "dst", "identification", "df", "mf", "frag_offset", "ttl",
        "options", "total_length",
    }}
    udp_kw = {k: v for k, v in kw.items() if k in {"sport", "dport", "length"}}
    payload = kw.get("payload", b"")
    transport = udp_header(**udp_kw) + payload
    return eth_frame(ipv4_header(proto=17, payload_len=len(transport), **ip_kw) + transport)


def icmp_frame(**kw) -> bytes:
    ip_kw = {k: v for k, v in kw.items() if k in {
        "src", "dst", "identification", "df", "mf", "frag_offset", "ttl",
        "options", "total_length",
    }}
    icmp_kw = {k: v for k, v in kw.items() if k in {"icmp_type", "code"}}
    payload = kw.get("payload", b"")
    transport = icmp_header(**icmp_kw) + payload
    return eth_frame(ipv4_header(proto=1, payload_len=len(transport), **ip_kw) + transport)


def pcap_bytes(frames, *, big_endian: bool = False, linktype: int = 1,
               timestamps_us=None) -> bytes:
    """Serialize (timestamp_us, frame) pairs to classic pcap bytes."""
    order = ">" if big_endian else "<"
    magic = 0xA1B2C3D4
    out = struct.pack(order + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    if timestamps_us is None:
        pairs = list(frames)
    else:
        pairs = list(zip(timestamps_us, frames))
    for ts_us, frame in pairs:
        out += struct.pack(
            order + "IIII", ts_us // 1_000_000, ts_us % 1_000_000, len(frame), len(frame)
        )
        out += frame
    return out


def parsed(frame: bytes):
    return parse_headers(frame)


def pkt(ts_us: int, frame: bytes):
    """(timestamp, decoded headers) pair as consumed by sample/scan."""
    return (ts_us, parse_headers(frame))


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path
