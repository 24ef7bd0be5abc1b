"""Command-line entry point: extract, fnn, trajectory, scan, monitor, gen.

Thin composition over the library: each subcommand parses files, calls the
corresponding library operations, and writes delimited output (CSV or JSON
Lines). Optional flags render matplotlib figures next to the data files, and
the trajectory command can emit a gnuplot script instead of, or alongside,
a rendered image.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (the error
class name appears in the message). All diagnostics go to stderr; stdout
carries only requested data.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

from . import multiwindow, plotting, synthgen
from .capture import load_pcap, parse_headers
from .embedding import (
    EmbeddingConfig,
    build_delay_vectors,
    default_delay,
    estimate_dimension,
    fnn_curve,
    write_fnn_csv,
)
from .errors import FlowtraceError
from .parameters import (
    Aggregator,
    ParameterId,
    read_series_csv,
    sample,
    write_series_csv,
)
from .signatures import (
    DetectionConfig,
    builtin_catalog,
    frequency_table,
    scan_packets,
    write_alerts_jsonl,
    write_frequency_csv,
)
from .trajectory import (
    histogram_to_dict,
    occupancy,
    project,
    write_gnuplot_script,
    write_histogram_csv,
    write_projection_csv,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise UsageError(message)


def _load_parsed_packets(path: str) -> list[tuple[int, object]]:
    """Read a pcap and decode headers, skipping undecodable packets."""
    _, records = load_pcap(path)
    packets = []
    skipped = 0
    for record in records:
        try:
            packets.append((record.timestamp_us, parse_headers(record)))
        except FlowtraceError:
            skipped += 1
    if skipped:
        print(f"note: skipped {skipped} undecodable packets", file=sys.stderr)
    return packets


@contextlib.contextmanager
def _out_stream(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _series_rows_jsonl(series, fh) -> None:
    tau_us = series.tau_us
    for n, value in enumerate(series.values):
        fh.write(
            json.dumps(
                {"n": n, "t_start_us": series.t0_us + n * tau_us, "value": float(value)},
                sort_keys=True,
            )
        )
        fh.write("\n")


def _cmd_extract(args) -> int:
    packets = _load_parsed_packets(args.pcap)
    parameter = ParameterId[args.param.upper()]
    series = sample(packets, parameter, args.tau, Aggregator(args.agg), args.fill)
    with _out_stream(args.out) as fh:
        if args.format == "jsonl":
            _series_rows_jsonl(series, fh)
        else:
            write_series_csv(series, fh)
    if args.fig:
        plotting.save_series_plot(series, args.fig)
        print(f"figure written to {args.fig}", file=sys.stderr)
    return 0


def _read_series(path: str):
    with open(path) as fh:
        return read_series_csv(fh)


def _cmd_fnn(args) -> int:
    series = _read_series(args.series)
    delay = args.delay if args.delay is not None else default_delay(series)
    if args.delay is None:
        print(f"auto delay T = {delay} (first autocorrelation drop below 1/e)", file=sys.stderr)
    config = EmbeddingConfig(
        delay_T=delay,
        max_dim=args.max_dim,
        r_tol=args.r_tol,
        a_tol=args.a_tol,
        theiler_w=args.theiler_w,
    )
    curve = fnn_curve(series, config)
    with _out_stream(args.out) as fh:
        if args.format == "jsonl":
            for d in range(1, curve.max_dim + 1):
                false_count, tested_count = curve.counts[d - 1]
                fh.write(
                    json.dumps(
                        {
                            "d": d,
                            "fraction": curve.fractions[d - 1],
                            "false_count": false_count,
                            "tested_count": tested_count,
                        },
                        sort_keys=True,
                    )
                )
                fh.write("\n")
        else:
            write_fnn_csv(curve, fh)
    estimate = estimate_dimension(curve, args.threshold)
    if estimate is None:
        print(
            f"no dimension up to {args.max_dim} reaches fraction <= {args.threshold}",
            file=sys.stderr,
        )
    else:
        print(
            f"estimated embedding dimension: {estimate} (threshold {args.threshold})",
            file=sys.stderr,
        )
    if args.fig:
        plotting.save_fnn_plot(curve, args.fig)
        print(f"figure written to {args.fig}", file=sys.stderr)
    return 0


def _cmd_trajectory(args) -> int:
    series = _read_series(args.series)
    axes = tuple(int(a) for a in args.axes.split(","))
    vectors = build_delay_vectors(series, args.dim, args.delay)
    projection = project(vectors, axes)
    hist = occupancy(projection, args.bins)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    projection_csv = prefix.with_name(prefix.name + "_projection.csv")
    with open(projection_csv, "w") as fh:
        write_projection_csv(projection, fh)
    with open(prefix.with_name(prefix.name + "_occupancy.csv"), "w") as fh:
        write_histogram_csv(hist, fh)
    with open(prefix.with_name(prefix.name + "_occupancy.json"), "w") as fh:
        json.dump(histogram_to_dict(hist), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"projection and occupancy written with prefix {prefix}", file=sys.stderr)

    if args.emit_plot:
        script = prefix.with_name(prefix.name + ".gp")
        with open(script, "w") as fh:
            write_gnuplot_script(projection_csv.name, len(axes), fh)
        print(f"gnuplot script written to {script}", file=sys.stderr)
    if args.fig:
        plotting.save_projection_plot(projection, args.fig)
        print(f"figure written to {args.fig}", file=sys.stderr)
    return 0


def _detection_config(args) -> DetectionConfig:
    return DetectionConfig(
        netmask_prefix=args.netmask,
        syn_k=args.syn_k,
        syn_w=args.syn_w,
        scan_k=args.scan_k,
        scan_w=args.scan_w,
    )


def _cmd_scan(args) -> int:
    catalog = builtin_catalog()
    if args.freq_out:
        with open(args.freq_out, "w") as fh:
            write_frequency_csv(frequency_table(catalog), fh)
        print(f"frequency table written to {args.freq_out}", file=sys.stderr)
    if args.freq_fig:
        plotting.save_frequency_plot(frequency_table(catalog), args.freq_fig)
        print(f"figure written to {args.freq_fig}", file=sys.stderr)
    if args.pcap is None:
        if not (args.freq_out or args.freq_fig):
            raise UsageError("scan needs --pcap unless only --freq-out/--freq-fig are requested")
        return 0
    packets = _load_parsed_packets(args.pcap)
    alerts = scan_packets(packets, catalog, _detection_config(args))
    with _out_stream(args.out) as fh:
        write_alerts_jsonl(alerts, fh)
    print(f"{len(alerts)} alerts", file=sys.stderr)
    return 0


def _cmd_monitor(args) -> int:
    packets = _load_parsed_packets(args.pcap)
    if args.plan:
        specs = multiwindow.load_plan(args.plan)
    else:
        specs = multiwindow.default_plan()
        print("no --plan given; using the built-in default plan", file=sys.stderr)
    result = multiwindow.run_plan(
        packets, specs, config=_detection_config(args), partial=args.partial
    )
    reports = result.reports
    if not args.no_cascade:
        reports = multiwindow.apply_cascade_hints(reports, args.cascade_percentile)
    with _out_stream(args.out) as fh:
        multiwindow.write_reports_jsonl(reports, fh)
    if args.alerts:
        with open(args.alerts, "w") as fh:
            write_alerts_jsonl(result.alerts, fh)
    for failure in result.failures:
        print(
            f"spec {failure.label!r} failed: {failure.error_name}: {failure.message}",
            file=sys.stderr,
        )
    print(
        f"{len(reports)} window reports, {len(result.alerts)} alerts",
        file=sys.stderr,
    )
    return 0


def _parse_episode(text: str) -> synthgen.AttackEpisode:
    parts = text.split(":", 3)
    if len(parts) < 3:
        raise UsageError(
            f"episode {text!r} must look like kind:start:end[:key=value,key=value]"
        )
    kind, start, end = parts[0], parts[1], parts[2]
    params: dict = {}
    if len(parts) == 4 and parts[3]:
        for pair in parts[3].split(","):
            key, _, value = pair.partition("=")
            if not _:
                raise UsageError(f"episode parameter {pair!r} must be key=value")
            params[key] = int(value) if value.isdigit() else value
    try:
        return synthgen.AttackEpisode(kind=kind, t_start=float(start), t_end=float(end), params=params)
    except ValueError as exc:
        raise UsageError(f"bad episode {text!r}: {exc}") from exc


def _cmd_gen(args) -> int:
    profile = synthgen.TrafficProfile(seed=args.seed, duration=args.duration, rate=args.rate)
    if args.mix:
        mix = []
        for pair in args.mix.split(","):
            name, _, weight = pair.partition("=")
            mix.append((name, float(weight)))
        profile = synthgen.TrafficProfile(
            seed=args.seed, duration=args.duration, rate=args.rate, protocol_mix=tuple(mix)
        )
    episodes = [_parse_episode(text) for text in args.episode]
    packets, manifest = synthgen.generate(profile, episodes, out=args.out)
    if args.manifest:
        with open(args.manifest, "w") as fh:
            synthgen.write_manifest(manifest, fh)
    print(
        f"wrote {len(packets)} packets to {args.out} "
        f"({len(manifest)} attack packets in manifest)",
        file=sys.stderr,
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="flowtrace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("extract", help="sample one header parameter into a CSV time series")
    p.add_argument("--pcap", required=True)
    p.add_argument(
        "--param",
        required=True,
        type=str.upper,
        choices=[m.name for m in ParameterId],
    )
    p.add_argument("--tau", type=float, required=True, help="bin width in seconds")
    p.add_argument("--agg", default="last", choices=[a.value for a in Aggregator])
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--fig", default=None, help="also render the series to this image file")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("fnn", help="false-nearest-neighbor curve and dimension estimate")
    p.add_argument("--series", required=True, help="series CSV from extract")
    p.add_argument("--max-dim", type=int, default=10)
    p.add_argument("--delay", type=int, default=None, help="delay T (default: autocorrelation)")
    p.add_argument("--r-tol", type=float, default=15.0)
    p.add_argument("--a-tol", type=float, default=2.0)
    p.add_argument("--theiler-w", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.02)
    p.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    p.add_argument("--out", default=None)
    p.add_argument("--fig", default=None)
    p.set_defaults(func=_cmd_fnn)

    p = sub.add_parser("trajectory", help="project delay vectors and histogram occupancy")
    p.add_argument("--series", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--delay", type=int, default=1)
    p.add_argument("--axes", default="0,1", help="comma-separated component indices (2 or 3)")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out-prefix", required=True, help="prefix for the output files")
    p.add_argument("--emit-plot", action="store_true", help="write a gnuplot script")
    p.add_argument("--fig", default=None)
    p.set_defaults(func=_cmd_trajectory)

    p = sub.add_parser("scan", help="signature-scan a capture into JSONL alerts")
    p.add_argument("--pcap", default=None)
    p.add_argument("--netmask", type=int, default=24, help="broadcast detection prefix")
    p.add_argument("--syn-k", type=int, default=100)
    p.add_argument("--syn-w", type=float, default=5.0)
    p.add_argument("--scan-k", type=int, default=20)
    p.add_argument("--scan-w", type=float, default=5.0)
    p.add_argument("--out", default=None)
    p.add_argument("--freq-out", default=None, help="write the parameter frequency table CSV")
    p.add_argument("--freq-fig", default=None)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("monitor", help="run a multi-scale analysis plan")
    p.add_argument("--pcap", required=True)
    p.add_argument("--plan", default=None, help="plan JSON (default: built-in plan)")
    p.add_argument("--out", default=None, help="reports JSONL (default stdout)")
    p.add_argument("--alerts", default=None, help="also write alerts JSONL here")
    p.add_argument("--netmask", type=int, default=24)
    p.add_argument("--syn-k", type=int, default=100)
    p.add_argument("--syn-w", type=float, default=5.0)
    p.add_argument("--scan-k", type=int, default=20)
    p.add_argument("--scan-w", type=float, default=5.0)
    p.add_argument("--partial", action="store_true", help="skip failing specs instead of aborting")
    p.add_argument("--no-cascade", action="store_true")
    p.add_argument("--cascade-percentile", type=float, default=95.0)
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("gen", help="generate a synthetic capture with attack episodes")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--mix", default=None, help="protocol mix, e.g. tcp=0.6,udp=0.3,icmp=0.1")
    p.add_argument(
        "--episode",
        action="append",
        default=[],
        metavar="KIND:START:END[:PARAMS]",
        help=f"inject an episode; kinds: {', '.join(synthgen.EPISODE_KINDS)}",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FlowtraceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
