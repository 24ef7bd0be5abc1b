"""Deterministic synthetic pcap generation with injectable attack episodes.

Benign traffic is a Poisson stream of transactions: TCP sessions (proper
three-way handshake, a few data-less ACKs, FIN teardown), UDP request/reply
pairs, and ICMP echo pairs. Attack episodes inject packets matching one
catalog rule, spaced evenly over the episode interval, and every injected
packet is recorded in the ground-truth manifest.

The same (profile, episodes) pair always yields byte-identical output: the
benign stream is driven by one seeded RNG and episode packets are pure
functions of their parameters. Checksums are written as zero throughout;
decoding never verifies them.
"""

from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, BinaryIO, Iterable

from .capture import PacketRecord, format_addr, parse_addr
from .errors import UnknownKind, WriteFailure

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_PSH = 0x08
TCP_ACK = 0x10
TCP_URG = 0x20


@dataclass(frozen=True)
class TrafficProfile:
    """Shape of the benign background traffic."""

    seed: int = 42
    duration: float = 10.0
    rate: float = 50.0  # mean packets per second
    protocol_mix: tuple[tuple[str, float], ...] = (("tcp", 0.6), ("udp", 0.3), ("icmp", 0.1))
    subnets: tuple[tuple[str, int], ...] = (("10.0.1.0", 24), ("10.0.2.0", 24))
    server_ports: tuple[int, ...] = (22, 25, 53, 80, 443)
    ephemeral_range: tuple[int, int] = (32768, 60999)


@dataclass(frozen=True)
class AttackEpisode:
    """One attack burst: kind names a runtime catalog rule."""

    kind: str
    t_start: float
    t_end: float
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 <= self.t_start < self.t_end:
            raise ValueError(
                f"episode {self.kind!r} needs 0 <= t_start < t_end, "
                f"got ({self.t_start}, {self.t_end})"
            )


# ---------------------------------------------------------------- packet bytes


def build_ethernet(src_mac: bytes, dst_mac: bytes, ethertype: int, payload: bytes) -> bytes:
    return dst_mac + src_mac + struct.pack("!H", ethertype) + payload


def build_ipv4(
    src: int,
    dst: int,
    protocol: int,
    payload: bytes,
    identification: int = 0,
    df: bool = False,
    mf: bool = False,
    fragment_offset: int = 0,
    ttl: int = 64,
    options: bytes = b"",
) -> bytes:
    if len(options) % 4 != 0:
        raise ValueError("IP options must pad to a 4-byte multiple")
    header_len = 20 + len(options)
    vihl = (4 << 4) | (header_len // 4)
    flags_frag = (0x4000 if df else 0) | (0x2000 if mf else 0) | (fragment_offset & 0x1FFF)
    total_length = header_len + len(payload)
    header = struct.pack(
        "!BBHHHBBHII",
        vihl, 0, total_length, identification, flags_frag, ttl, protocol, 0, src, dst,
    )
    return header + options + payload


def build_tcp(
    sport: int, dport: int, seq: int, ack_num: int, flags: int,
    window: int = 8192, urgent_ptr: int = 0,
) -> bytes:
    off_flags = (5 << 12) | (flags & 0x3F)
    return struct.pack(
        "!HHIIHHHH", sport, dport, seq, ack_num, off_flags, window, 0, urgent_ptr
    )


def build_udp(sport: int, dport: int, payload: bytes = b"") -> bytes:
    return struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload


def build_icmp(icmp_type: int, code: int, payload: bytes = b"") -> bytes:
    return struct.pack("!BBH", icmp_type, code, 0) + payload


def _mac_for(addr: int) -> bytes:
    # locally administered MAC derived from the IPv4 address
    return b"\x02\x00" + addr.to_bytes(4, "big")


def build_frame(
    src: int, dst: int, protocol: int, payload: bytes, **ip_kwargs
) -> bytes:
    ip = build_ipv4(src, dst, protocol, payload, **ip_kwargs)
    return build_ethernet(_mac_for(src), _mac_for(dst), 0x0800, ip)


# ---------------------------------------------------------------- pcap writing


_GLOBAL_HEADER = struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)


def write_pcap(out: str | Path | BinaryIO, packets: Iterable[tuple[int, bytes]]) -> None:
    """Write (timestamp_us, frame bytes) pairs as a little-endian classic pcap."""
    own = isinstance(out, (str, Path))
    try:
        fh = open(out, "wb") if own else out
    except OSError as exc:
        raise WriteFailure(str(exc)) from exc
    try:
        fh.write(_GLOBAL_HEADER)
        for ts_us, frame in packets:
            fh.write(
                struct.pack("<IIII", ts_us // 1_000_000, ts_us % 1_000_000, len(frame), len(frame))
            )
            fh.write(frame)
    except OSError as exc:
        raise WriteFailure(str(exc)) from exc
    finally:
        if own:
            fh.close()


def records_from_pairs(packets: Iterable[tuple[int, bytes]]) -> list[PacketRecord]:
    return [
        PacketRecord(ts, len(frame), len(frame), frame) for ts, frame in packets
    ]


# ---------------------------------------------------------------- benign stream


def _host(subnet: tuple[str, int], host_index: int) -> int:
    base = parse_addr(subnet[0])
    return base | host_index


def _broadcast_of(subnet: tuple[str, int]) -> int:
    base = parse_addr(subnet[0])
    host_mask = (1 << (32 - subnet[1])) - 1
    return base | host_mask


_TCP_MEAN_PKTS = 3 + 5.5 + 3  # handshake + mean data acks + teardown
_UDP_MEAN_PKTS = 2.0
_ICMP_MEAN_PKTS = 2.0


class _BenignGenerator:
    def __init__(self, profile: TrafficProfile):
        self.profile = profile
        self.rng = random.Random(profile.seed)
        self.ident = 1
        self.seq_counter = 0
        self.packets: list[tuple[int, int, bytes]] = []  # (ts_us, order, frame)

    def _next_ident(self) -> int:
        self.ident = (self.ident + 1) & 0xFFFF
        return self.ident

    def _emit(self, ts: float, frame: bytes) -> None:
        self.seq_counter += 1
        self.packets.append((round(ts * 1e6), self.seq_counter, frame))

    def _pick_hosts(self) -> tuple[int, int]:
        subnets = self.profile.subnets
        a = _host(subnets[self.rng.randrange(len(subnets))], self.rng.randint(2, 250))
        b = _host(subnets[self.rng.randrange(len(subnets))], self.rng.randint(2, 250))
        while b == a:
            b = _host(subnets[self.rng.randrange(len(subnets))], self.rng.randint(2, 250))
        return a, b

    def _eph_port(self) -> int:
        lo, hi = self.profile.ephemeral_range
        return self.rng.randint(lo, hi)

    def _tcp_session(self, t: float) -> None:
        rng = self.rng
        client, server = self._pick_hosts()
        sport = self._eph_port()
        dport = rng.choice(self.profile.server_ports)
        c_seq = rng.getrandbits(32)
        s_seq = rng.getrandbits(32)

        def seg(ts, src, dst, sp, dp, seq, ack_num, flags):
            self._emit(
                ts,
                build_frame(
                    src, dst, 6, build_tcp(sp, dp, seq, ack_num, flags),
                    identification=self._next_ident(), df=True,
                ),
            )

        rtt = rng.uniform(0.0005, 0.004)
        seg(t, client, server, sport, dport, c_seq, 0, TCP_SYN)
        seg(t + rtt, server, client, dport, sport, s_seq, c_seq + 1, TCP_SYN | TCP_ACK)
        t = t + 2 * rtt
        seg(t, client, server, sport, dport, c_seq + 1, s_seq + 1, TCP_ACK)
        for i in range(rng.randint(1, 10)):
            t += rng.uniform(0.005, 0.08)
            if i % 2 == 0:
                seg(t, client, server, sport, dport, c_seq + 1, s_seq + 1, TCP_ACK)
            else:
                seg(t, server, client, dport, sport, s_seq + 1, c_seq + 1, TCP_ACK)
        # teardown: FIN segments ride with ACK, as live stacks send them
        t += rng.uniform(0.005, 0.05)
        seg(t, client, server, sport, dport, c_seq + 1, s_seq + 1, TCP_FIN | TCP_ACK)
        t += rtt
        seg(t, server, client, dport, sport, s_seq + 1, c_seq + 2, TCP_FIN | TCP_ACK)
        t += rtt
        seg(t, client, server, sport, dport, c_seq + 2, s_seq + 2, TCP_ACK)

    def _udp_pair(self, t: float) -> None:
        rng = self.rng
        client, server = self._pick_hosts()
        sport = self._eph_port()
        dport = rng.choice(self.profile.server_ports)
        req = build_udp(sport, dport, bytes(rng.randrange(256) for _ in range(rng.randint(8, 64))))
        self._emit(t, build_frame(client, server, 17, req, identification=self._next_ident(), df=True))
        rep = build_udp(dport, sport, bytes(rng.randrange(256) for _ in range(rng.randint(8, 128))))
        self._emit(
            t + rng.uniform(0.0005, 0.01),
            build_frame(server, client, 17, rep, identification=self._next_ident(), df=True),
        )

    def _icmp_pair(self, t: float) -> None:
        rng = self.rng
        client, server = self._pick_hosts()
        probe = bytes(rng.randrange(256) for _ in range(32))
        self._emit(
            t,
            build_frame(client, server, 1, build_icmp(8, 0, probe),
                        identification=self._next_ident()),
        )
        self._emit(
            t + rng.uniform(0.0005, 0.005),
            build_frame(server, client, 1, build_icmp(0, 0, probe),
                        identification=self._next_ident()),
        )

    def run(self) -> list[tuple[int, int, bytes]]:
        profile = self.profile
        weights = dict(profile.protocol_mix)
        total_w = sum(weights.values())
        mean_pkts = (
            weights.get("tcp", 0.0) * _TCP_MEAN_PKTS
            + weights.get("udp", 0.0) * _UDP_MEAN_PKTS
            + weights.get("icmp", 0.0) * _ICMP_MEAN_PKTS
        ) / total_w
        tx_rate = profile.rate / mean_pkts
        kinds = list(weights)
        kind_weights = [weights[k] for k in kinds]
        t = 0.0
        while True:
            t += self.rng.expovariate(tx_rate)
            if t >= profile.duration:
                break
            kind = self.rng.choices(kinds, weights=kind_weights)[0]
            if kind == "tcp":
                self._tcp_session(t)
            elif kind == "udp":
                self._udp_pair(t)
            else:
                self._icmp_pair(t)
        return self.packets


# ---------------------------------------------------------------- episodes


def _episode_times(episode: AttackEpisode, count: int) -> list[float]:
    span = episode.t_end - episode.t_start
    return [episode.t_start + span * (i + 0.5) / count for i in range(count)]


def _param(episode: AttackEpisode, name: str, default):
    value = episode.params.get(name, default)
    if isinstance(default, int) and isinstance(value, str):
        return int(value)
    return value


def _addr_param(episode: AttackEpisode, name: str, default: int) -> int:
    value = episode.params.get(name)
    if value is None:
        return default
    return parse_addr(value) if isinstance(value, str) else int(value)


def _gen_land(ep, profile, ident):
    target = _addr_param(ep, "target", _host(profile.subnets[0], 77))
    port = _param(ep, "port", 139)
    out = []
    for t in _episode_times(ep, _param(ep, "count", 5)):
        frame = build_frame(
            target, target, 6, build_tcp(port, port, 1, 0, TCP_SYN),
            identification=next(ident),
        )
        out.append((t, frame, target, target))
    return out

def _gen_scan(flags: int, same_ports: bool):
    def gen(ep, profile, ident):
        attacker = _addr_param(ep, "src", parse_addr("203.0.113.9"))
        target = _addr_param(ep, "target", _host(profile.subnets[0], 80))
        count = _param(ep, "count", 30)
        base_port = _param(ep, "base_port", 1000)
        out = []
        for i, t in enumerate(_episode_times(ep, count)):
            dport = base_port + i
            sport = dport if same_ports else 51000 + (i % 900)
            frame = build_frame(
                attacker, target, 6, build_tcp(sport, dport, 7, 7 if flags & TCP_ACK else 0, flags),
                identification=next(ident),
            )
            out.append((t, frame, attacker, target))
        return out

    return gen

def _gen_syn_flood(ep, profile, ident):
    target = _addr_param(ep, "target", _host(profile.subnets[0], 90))
    port = _param(ep, "port", 80)
    count = _param(ep, "count", 200)
    spoof_base = parse_addr("198.18.0.0")
    out = []
    for i, t in enumerate(_episode_times(ep, count)):
        src = spoof_base + 1 + (i % 4000)
        frame = build_frame(
            src, target, 6, build_tcp(30000 + (i % 20000), port, i, 0, TCP_SYN),
            identification=next(ident),
        )
        out.append((t, frame, src, target))
    return out

def _gen_smurf(ep, profile, ident):
    victim = _addr_param(ep, "victim", _host(profile.subnets[0], 50))
    bcast = _addr_param(ep, "target", _broadcast_of(profile.subnets[0]))
    out = []
    for t in _episode_times(ep, _param(ep, "count", 30)):
        frame = build_frame(
            victim, bcast, 1, build_icmp(8, 0, b"\x00" * 32), identification=next(ident)
        )
        out.append((t, frame, victim, bcast))
    return out

def _gen_fraggle(ep, profile, ident):
    victim = _addr_param(ep, "victim", _host(profile.subnets[0], 51))
    bcast = _addr_param(ep, "target", _broadcast_of(profile.subnets[0]))
    port = _param(ep, "port", 7)
    out = []
    for i, t in enumerate(_episode_times(ep, _param(ep, "count", 30))):
        frame = build_frame(
            victim, bcast, 17, build_udp(40000 + i, port, b"\x00" * 8),
            identification=next(ident),
        )
        out.append((t, frame, victim, bcast))
    return out

def _gen_pingpong(ep, profile, ident):
    a = _addr_param(ep, "src", _host(profile.subnets[0], 60))
    b = _addr_param(ep, "target", _host(profile.subnets[1], 61))
    out = []
    for i, t in enumerate(_episode_times(ep, _param(ep, "count", 30))):
        src, dst = (a, b) if i % 2 == 0 else (b, a)
        frame = build_frame(
            src, dst, 17, build_udp(7, 19, b"\x00" * 4), identification=next(ident)
        )
        out.append((t, frame, src, dst))
    return out

def _gen_ping_of_death(ep, profile, ident):
    src = _addr_param(ep, "src", parse_addr("203.0.113.13"))
    target = _addr_param(ep, "target", _host(profile.subnets[0], 70))
    out = []
    for t in _episode_times(ep, _param(ep, "count", 5)):
        # final fragment far past the 65535-byte limit: 8189*8 + 100 > 65535
        frame = build_frame(
            src, target, 1, b"\x00" * 100,
            identification=next(ident), mf=False, fragment_offset=8189,
        )
        out.append((t, frame, src, target))
    return out

def _gen_fragment_overlap(ep, profile, ident):
    src = _addr_param(ep, "src", parse_addr("203.0.113.21"))
    target = _addr_param(ep, "target", _host(profile.subnets[0], 71))
    out = []
    for t in _episode_times(ep, _param(ep, "count", 5)):
        ip_id = next(ident)
        first = build_frame(
            src, target, 1, build_icmp(8, 0, b"\x00" * 20),
            identification=ip_id, mf=True, fragment_offset=0,
        )
        # second fragment restarts 8 bytes in: [8, 32) overlaps [0, 24)
        second = build_frame(
            src, target, 1, b"\x00" * 24,
            identification=ip_id, mf=False, fragment_offset=1,
        )
        out.append((t, first, src, target))
        out.append((t + 0.001, second, src, target))
    return out

def _gen_bonk(ep, profile, ident):
    src = _addr_param(ep, "src", parse_addr("203.0.113.22"))
    target = _addr_param(ep, "target", _host(profile.subnets[0], 72))
    out = []
    for t in _episode_times(ep, _param(ep, "count", 5)):
        ip_id = next(ident)
        first = build_frame(
            src, target, 17, build_udp(4000, 4001, b"\x00" * 24),
            identification=ip_id, mf=True, fragment_offset=0,
        )
        # overlapping UDP fragment that still claims more fragments follow
        second = build_frame(
            src, target, 17, b"\x00" * 24,
            identification=ip_id, mf=True, fragment_offset=2,
        )
        out.append((t, first, src, target))
        out.append((t + 0.001, second, src, target))
    return out

def _gen_oob_bug(ep, profile, ident):
    src = _addr_param(ep, "src", parse_addr("203.0.113.31"))
    target = _addr_param(ep, "target", _host(profile.subnets[0], 73))
    out = []
    for i, t in enumerate(_episode_times(ep, _param(ep, "count", 5))):
        frame = build_frame(
            src, target, 6,
            build_tcp(45000 + i, 139, 9, 9, TCP_URG | TCP_ACK, urgent_ptr=1),
            identification=next(ident),
        )
        out.append((t, frame, src, target))
    return out

def _gen_unaligned_ts(ep, profile, ident):
    src = _addr_param(ep, "src", parse_addr("203.0.113.32"))
    target = _addr_param(ep, "target", _host(profile.subnets[0], 74))
    # timestamp option claims length 7; valid lengths are 4 + 8k
    options = bytes([68, 7, 5, 0]) + b"\x00" * 4
    out = []
    for t in _episode_times(ep, _param(ep, "count", 5)):
        frame = build_frame(
            src, target, 1, build_icmp(8, 0, b"\x00" * 8),
            identification=next(ident), options=options,
        )
        out.append((t, frame, src, target))
    return out


_EPISODE_GENERATORS = {
    "land": _gen_land,
    "ack_scan": _gen_scan(TCP_ACK, same_ports=True),
    "fin_scan": _gen_scan(TCP_FIN, same_ports=False),
    "synfin_scan": _gen_scan(TCP_SYN | TCP_FIN, same_ports=False),
    "syn_flood": _gen_syn_flood,
    "smurf": _gen_smurf,
    "fraggle": _gen_fraggle,
    "pingpong": _gen_pingpong,
    "ping_of_death": _gen_ping_of_death,
    "fragment_overlap": _gen_fragment_overlap,
    "bonk": _gen_bonk,
    "oob_bug": _gen_oob_bug,
    "unaligned_ts": _gen_unaligned_ts,
}

EPISODE_KINDS = tuple(sorted(_EPISODE_GENERATORS))


def _attack_ident_counter():
    value = 40000
    while True:
        value += 1
        yield value & 0xFFFF


def generate(
    profile: TrafficProfile,
    episodes: Iterable[AttackEpisode] = (),
    out: str | Path | BinaryIO | None = None,
) -> tuple[list[tuple[int, bytes]], list[dict]]:
    """Generate the traffic; optionally write the pcap.

    Returns (packets, manifest): packets as (timestamp_us, frame) pairs in
    timestamp order, manifest as ground-truth dicts for every attack packet.
    """
    episodes = list(episodes)
    for ep in episodes:
        if ep.kind not in _EPISODE_GENERATORS:
            raise UnknownKind(
                f"no generator for episode kind {ep.kind!r}; known: {', '.join(EPISODE_KINDS)}"
            )
        if ep.t_end > profile.duration:
            raise ValueError(
                f"episode {ep.kind} ends at {ep.t_end}s, past the "
                f"{profile.duration}s capture"
            )

    tagged = _BenignGenerator(profile).run()
    manifest: list[dict] = []
    ident = _attack_ident_counter()
    order = len(tagged)
    for ep in episodes:
        for t, frame, src, dst in _EPISODE_GENERATORS[ep.kind](ep, profile, ident):
            order += 1
            ts_us = round(t * 1e6)
            tagged.append((ts_us, order, frame))
            manifest.append(
                {"ts_us": ts_us, "kind": ep.kind, "src": format_addr(src), "dst": format_addr(dst)}
            )

    tagged.sort(key=lambda item: (item[0], item[1]))
    packets = [(ts, frame) for ts, _, frame in tagged]
    manifest.sort(key=lambda entry: entry["ts_us"])
    if out is not None:
        write_pcap(out, packets)
    return packets, manifest


def write_manifest(manifest: list[dict], fh: IO[str]) -> None:
    json.dump(manifest, fh, indent=2, sort_keys=True)
    fh.write("\n")
