"""Classic pcap file reading and Ethernet/IPv4/TCP/UDP/ICMP header decoding.

Only the classic microsecond pcap format is accepted (both byte orders).
Record framing follows the file's byte order; the packet bytes themselves
are network order (big-endian) regardless of the file's framing, so header
fields always decode with ``!`` struct formats.

Decoding is total: any byte payload either yields a ParsedHeaders or raises
one of the declared errors (Truncated, MalformedHeader). Nothing else can
escape parse_headers, which makes it safe to point at hostile input.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

from .errors import BadMagic, MalformedHeader, Truncated, UnsupportedLinkType

# Magic bytes as they appear on disk. A file written on a big-endian host
# leads with a1 b2 c3 d4; a little-endian writer flips the same value.
_MAGIC_BIG = b"\xa1\xb2\xc3\xd4"
_MAGIC_LITTLE = b"\xd4\xc3\xb2\xa1"
PCAP_MAGIC = 0xA1B2C3D4

LINKTYPE_ETHERNET = 1

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100

PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17


@dataclass(frozen=True)
class PcapFileHeader:
    """Global pcap header; ``swapped`` is True when record framing is little-endian."""

    magic: int
    version_major: int
    version_minor: int
    snaplen: int
    linktype: int
    swapped: bool


@dataclass(frozen=True)
class PacketRecord:
    """One captured packet: microsecond timestamp plus the captured bytes."""

    timestamp_us: int
    captured_len: int
    original_len: int
    payload: bytes


@dataclass(frozen=True)
class IpHeader:
    version: int
    header_len_bytes: int
    total_length: int
    identification: int
    df: bool
    mf: bool
    fragment_offset: int  # units of 8 bytes
    ttl: int
    protocol: int
    src_addr: int
    dst_addr: int
    options: bytes


@dataclass(frozen=True)
class TcpHeader:
    src_port: int
    dst_port: int
    seq: int
    ack_num: int
    data_offset_bytes: int
    fin: bool
    syn: bool
    rst: bool
    psh: bool
    ack: bool
    urg: bool
    window: int
    urgent_ptr: int


@dataclass(frozen=True)
class UdpHeader:
    src_port: int
    dst_port: int
    length: int


@dataclass(frozen=True)
class IcmpHeader:
    type: int
    code: int


@dataclass(frozen=True)
class ParsedHeaders:
    """Decoded header stack; absent layers are None (e.g. ARP has no ip)."""

    eth_dst: int
    eth_src: int
    ethertype: int
    ip: IpHeader | None = None
    tcp: TcpHeader | None = None
    udp: UdpHeader | None = None
    icmp: IcmpHeader | None = None


def _as_stream(source: str | Path | bytes | BinaryIO) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source)), True
    return source, False


def read_pcap(source: str | Path | bytes | BinaryIO) -> tuple[PcapFileHeader, Iterator[PacketRecord]]:
    """Open a classic pcap byte stream.

    Returns the parsed global header and a lazy record iterator. The iterator
    raises Truncated if the stream ends inside a record. Files in either byte
    order are accepted; anything else (including the nanosecond variant) is
    BadMagic. Non-Ethernet captures raise UnsupportedLinkType.
    """
    stream, owns = _as_stream(source)
    try:
        head = stream.read(24)
    except Exception:
        if owns:
            stream.close()
        raise
    if len(head) < 4:
        if owns:
            stream.close()
        raise BadMagic("file too short to hold a pcap magic number")
    magic = head[:4]
    if magic == _MAGIC_BIG:
        order = ">"
    elif magic == _MAGIC_LITTLE:
        order = "<"
    else:
        if owns:
            stream.close()
        raise BadMagic(f"unrecognized pcap magic {magic.hex()}")
    if len(head) < 24:
        if owns:
            stream.close()
        raise Truncated("pcap global header cut short")
    vmaj, vmin, _thiszone, _sigfigs, snaplen, linktype = struct.unpack(order + "HHiIII", head[4:])
    if linktype != LINKTYPE_ETHERNET:
        if owns:
            stream.close()
        raise UnsupportedLinkType(f"linktype {linktype} not supported (need Ethernet = 1)")
    header = PcapFileHeader(
        magic=PCAP_MAGIC,
        version_major=vmaj,
        version_minor=vmin,
        snaplen=snaplen,
        linktype=linktype,
        swapped=(order == "<"),
    )
    return header, _iter_records(stream, order, owns)


def _iter_records(stream: BinaryIO, order: str, owns: bool) -> Iterator[PacketRecord]:
    rec = struct.Struct(order + "IIII")
    try:
        while True:
            head = stream.read(16)
            if not head:
                return
            if len(head) < 16:
                raise Truncated("pcap record header cut short")
            ts_sec, ts_usec, incl_len, orig_len = rec.unpack(head)
            payload = stream.read(incl_len)
            if len(payload) < incl_len:
                raise Truncated(
                    f"record promised {incl_len} bytes but stream held {len(payload)}"
                )
            yield PacketRecord(
                timestamp_us=ts_sec * 1_000_000 + ts_usec,
                captured_len=incl_len,
                original_len=orig_len,
                payload=payload,
            )
    finally:
        if owns:
            stream.close()


def load_pcap(source: str | Path | bytes | BinaryIO) -> tuple[PcapFileHeader, list[PacketRecord]]:
    """Eager variant of read_pcap for desk-scale files."""
    header, records = read_pcap(source)
    return header, list(records)


def parse_headers(packet: PacketRecord | bytes) -> ParsedHeaders:
    """Decode Ethernet II and, where present, IPv4 plus one transport header.

    One level of 802.1Q VLAN tagging is skipped transparently. Transport
    headers are decoded only on unfragmented packets or first fragments
    (fragment_offset == 0); later fragments carry opaque payload. Non-IPv4
    ethertypes yield a ParsedHeaders with ip=None rather than an error.

    Raises Truncated when the captured bytes end inside a declared header and
    MalformedHeader when a field is structurally impossible.
    """
    data = packet.payload if isinstance(packet, PacketRecord) else bytes(packet)
    if len(data) < 14:
        raise Truncated(f"ethernet header needs 14 bytes, got {len(data)}")
    eth_dst = int.from_bytes(data[0:6], "big")
    eth_src = int.from_bytes(data[6:12], "big")
    ethertype = int.from_bytes(data[12:14], "big")
    off = 14
    if ethertype == ETHERTYPE_VLAN:
        # skip one tag: 2 bytes TCI, then the real ethertype
        if len(data) < 18:
            raise Truncated("VLAN tag cut short")
        ethertype = int.from_bytes(data[16:18], "big")
        off = 18

    if ethertype != ETHERTYPE_IPV4:
        return ParsedHeaders(eth_dst=eth_dst, eth_src=eth_src, ethertype=ethertype)

    ip = _parse_ipv4(data, off)
    tcp = udp = icmp = None
    if ip.fragment_offset == 0:
        toff = off + ip.header_len_bytes
        if ip.protocol == PROTO_TCP:
            tcp = _parse_tcp(data, toff)
        elif ip.protocol == PROTO_UDP:
            udp = _parse_udp(data, toff)
        elif ip.protocol == PROTO_ICMP:
            icmp = _parse_icmp(data, toff)
    return ParsedHeaders(
        eth_dst=eth_dst, eth_src=eth_src, ethertype=ethertype,
        ip=ip, tcp=tcp, udp=udp, icmp=icmp,
    )


def _parse_ipv4(data: bytes, off: int) -> IpHeader:
    if len(data) < off + 20:
        raise Truncated("IPv4 base header cut short")
    vihl = data[off]
    version = vihl >> 4
    header_len = (vihl & 0x0F) * 4
    if version != 4:
        raise MalformedHeader(f"IP version {version} inside an IPv4 frame")
    if header_len < 20:
        raise MalformedHeader(f"IPv4 IHL gives {header_len} bytes, minimum is 20")
    if len(data) < off + header_len:
        raise Truncated("IPv4 options cut short")
    total_length, identification, flags_frag = struct.unpack_from("!HHH", data, off + 2)
    ttl = data[off + 8]
    protocol = data[off + 9]
    src_addr, dst_addr = struct.unpack_from("!II", data, off + 12)
    return IpHeader(
        version=version,
        header_len_bytes=header_len,
        total_length=total_length,
        identification=identification,
        df=bool(flags_frag & 0x4000),
        mf=bool(flags_frag & 0x2000),
        fragment_offset=flags_frag & 0x1FFF,
        ttl=ttl,
        protocol=protocol,
        src_addr=src_addr,
        dst_addr=dst_addr,
        options=bytes(data[off + 20 : off + header_len]),
    )


def _parse_tcp(data: bytes, off: int) -> TcpHeader:
    if len(data) < off + 20:
        raise Truncated("TCP header cut short")
    sport, dport, seq, ack_num, off_flags, window, _csum, urg_ptr = struct.unpack_from(
        "!HHIIHHHH", data, off
    )
    return TcpHeader(
        src_port=sport,
        dst_port=dport,
        seq=seq,
        ack_num=ack_num,
        data_offset_bytes=((off_flags >> 12) & 0x0F) * 4,
        fin=bool(off_flags & 0x01),
        syn=bool(off_flags & 0x02),
        rst=bool(off_flags & 0x04),
        psh=bool(off_flags & 0x08),
        ack=bool(off_flags & 0x10),
        urg=bool(off_flags & 0x20),
        window=window,
        urgent_ptr=urg_ptr,
    )


def _parse_udp(data: bytes, off: int) -> UdpHeader:
    if len(data) < off + 8:
        raise Truncated("UDP header cut short")
    sport, dport, length, _csum = struct.unpack_from("!HHHH", data, off)
    return UdpHeader(src_port=sport, dst_port=dport, length=length)


def _parse_icmp(data: bytes, off: int) -> IcmpHeader:
    if len(data) < off + 2:
        raise Truncated("ICMP header cut short")
    return IcmpHeader(type=data[off], code=data[off + 1])


def format_addr(addr: int) -> str:
    """Render a 32-bit address as a dotted quad."""
    return f"{(addr >> 24) & 0xFF}.{(addr >> 16) & 0xFF}.{(addr >> 8) & 0xFF}.{addr & 0xFF}"


def parse_addr(text: str) -> int:
    """Parse a dotted quad into a 32-bit unsigned integer."""
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"not a dotted quad: {text!r}")
    value = 0
    for part in parts:
        octet = int(part)
        if not 0 <= octet <= 255:
            raise ValueError(f"octet out of range in {text!r}")
        value = (value << 8) | octet
    return value
