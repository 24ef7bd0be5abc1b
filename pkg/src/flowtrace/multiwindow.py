"""Multi-time-scale analysis plans over one packet stream.

Each WindowSpec samples the stream at its own interval tau, splits the
resulting series into fixed-length windows, embeds and projects each window,
and scores its occupancy against an optional per-parameter baseline.
Signature scanning runs once at native packet resolution; every window
counts the alerts inside its time range.

Specs never interact: deleting one from a plan leaves every other spec's
reports byte-for-byte unchanged, and repeated runs over the same input are
byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .capture import ParsedHeaders
from .errors import EmptyPlan, FlowtraceError, PlanStageError
from .parameters import Aggregator, ParameterId, sample
from .embedding import build_delay_vectors
from .signatures import Alert, DetectionConfig, DEFAULT_CONFIG, SignatureRule, scan_packets
from .trajectory import (
    OccupancyHistogram,
    deviation_score,
    histogram_from_dict,
    occupancy_like,
    project,
)


@dataclass
class WindowSpec:
    """One time scale: sampling interval, window length, and parameters."""

    label: str
    tau: float
    window_len: int
    parameters: tuple[ParameterId, ...]
    aggregator: Aggregator = Aggregator.LAST
    fill: float = 0.0
    embed_dim: int = 3
    embed_delay: int = 1
    axes: tuple[int, ...] = (0, 1)
    bins_per_axis: int = 20
    baseline: dict[ParameterId, OccupancyHistogram] | None = None


@dataclass
class WindowReport:
    label: str
    window_index: int
    t_start_us: int
    t_end_us: int
    scores: dict[str, float | None]
    alert_count: int
    hints: tuple[dict, ...] = ()


@dataclass
class PlanFailure:
    label: str
    error_name: str
    message: str


@dataclass
class PlanResult:
    reports: list[WindowReport]
    alerts: list[Alert]
    failures: list[PlanFailure] = field(default_factory=list)


def default_plan(parameters: Sequence[ParameterId] = (ParameterId.IP_PROTOCOL,)) -> list[WindowSpec]:
    """Desk-scale default: sub-second, session, and long-haul time scales."""
    params = tuple(parameters)
    return [
        WindowSpec(label="fast", tau=0.1, window_len=50, parameters=params),
        WindowSpec(label="session", tau=5.0, window_len=12, parameters=params),
        WindowSpec(label="slow", tau=60.0, window_len=10, parameters=params),
    ]


def _run_spec(
    packets: list[tuple[int, ParsedHeaders]],
    spec: WindowSpec,
    alerts: list[Alert],
) -> list[WindowReport]:
    if spec.window_len < 2:
        raise FlowtraceError(f"window_len must be >= 2, got {spec.window_len}")
    if not spec.parameters:
        raise FlowtraceError("spec lists no parameters")
    series_by_param = {
        param: sample(packets, param, spec.tau, spec.aggregator, spec.fill)
        for param in spec.parameters
    }
    any_series = next(iter(series_by_param.values()))
    n_bins = len(any_series)
    if n_bins == 0:
        return []
    tau_us = any_series.tau_us
    t0 = any_series.t0_us
    length = spec.window_len
    n_windows = math.ceil(n_bins / length)

    reports: list[WindowReport] = []
    for w in range(n_windows):
        scores: dict[str, float | None] = {}
        for param, series in series_by_param.items():
            window = series.values[w * length : (w + 1) * length]
            if len(window) < length:
                # final partial window padded to full length with the fill value
                window = np.concatenate(
                    [window, np.full(length - len(window), spec.fill)]
                )
            baseline = (spec.baseline or {}).get(param)
            if baseline is None:
                scores[param.name] = None
                continue
            vectors = build_delay_vectors(window, spec.embed_dim, spec.embed_delay)
            projection = project(vectors, spec.axes)
            observed = occupancy_like(projection, baseline)
            scores[param.name] = deviation_score(baseline, observed)
        t_start = t0 + w * length * tau_us
        t_end = t0 + (w + 1) * length * tau_us
        alert_count = sum(1 for a in alerts if t_start <= a.ts_us < t_end)
        reports.append(
            WindowReport(
                label=spec.label,
                window_index=w,
                t_start_us=t_start,
                t_end_us=t_end,
                scores=scores,
                alert_count=alert_count,
            )
        )
    return reports


def run_plan(
    packets: Iterable[tuple[int, ParsedHeaders]],
    specs: Sequence[WindowSpec],
    catalog: list[SignatureRule] | None = None,
    config: DetectionConfig = DEFAULT_CONFIG,
    partial: bool = False,
) -> PlanResult:
    """Run every spec over the stream.

    With partial=True a failing spec is recorded in result.failures and the
    rest proceed; otherwise the first failure raises PlanStageError tagged
    with that stage's label. Raises EmptyPlan when specs is empty.
    """
    specs = list(specs)
    if not specs:
        raise EmptyPlan("plan contains no window specs")
    labels = [spec.label for spec in specs]
    if len(set(labels)) != len(labels):
        raise FlowtraceError(f"plan labels must be unique, got {labels}")
    packets = list(packets)
    alerts = scan_packets(packets, catalog, config)
    result = PlanResult(reports=[], alerts=alerts)
    for spec in specs:
        try:
            result.reports.extend(_run_spec(packets, spec, alerts))
        except FlowtraceError as exc:
            if not partial:
                raise PlanStageError(spec.label, exc) from exc
            result.failures.append(
                PlanFailure(label=spec.label, error_name=type(exc).__name__, message=str(exc))
            )
    result.reports.sort(key=lambda r: (r.label, r.window_index))
    return result


def apply_cascade_hints(
    reports: Sequence[WindowReport], percentile: float = 95.0
) -> list[WindowReport]:
    """Annotate longer-scale reports with hot shorter-scale windows.

    A window is hot when its best-defined deviation score strictly exceeds
    the given percentile of its own label's scores. Hints are annotation
    only; every score field is returned untouched.
    """
    spans: dict[str, int] = {}
    label_scores: dict[str, list[float]] = {}
    for report in reports:
        spans.setdefault(report.label, report.t_end_us - report.t_start_us)
        score = _window_score(report)
        if score is not None:
            label_scores.setdefault(report.label, []).append(score)

    thresholds = {
        label: float(np.percentile(np.asarray(scores), percentile))
        for label, scores in label_scores.items()
    }

    hot: list[tuple[WindowReport, float]] = []
    for report in reports:
        score = _window_score(report)
        if score is not None and score > thresholds[report.label]:
            hot.append((report, score))

    out: list[WindowReport] = []
    for report in reports:
        span = spans[report.label]
        hints = [
            {
                "label": short.label,
                "window_index": short.window_index,
                "score": score,
            }
            for short, score in hot
            if spans[short.label] < span
            and report.t_start_us <= short.t_start_us
            and short.t_end_us <= report.t_end_us
        ]
        hints.sort(key=lambda h: (h["label"], h["window_index"]))
        out.append(replace(report, hints=tuple(hints)))
    return out


def _window_score(report: WindowReport) -> float | None:
    defined = [s for s in report.scores.values() if s is not None]
    return max(defined) if defined else None


def report_to_dict(report: WindowReport) -> dict:
    return {
        "label": report.label,
        "window_index": report.window_index,
        "t_start_us": report.t_start_us,
        "t_end_us": report.t_end_us,
        "scores": dict(sorted(report.scores.items())),
        "alert_count": report.alert_count,
        "hints": list(report.hints),
    }


def write_reports_jsonl(reports: Iterable[WindowReport], fh: IO[str]) -> None:
    for report in reports:
        fh.write(json.dumps(report_to_dict(report), sort_keys=True))
        fh.write("\n")


def load_plan(path: str | Path) -> list[WindowSpec]:
    """Load a plan file: a JSON array of window spec objects.

    Baseline values are paths to occupancy-histogram JSON files, resolved
    relative to the plan file, keyed by parameter name.
    """
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise FlowtraceError("plan file must hold a JSON array of window specs")
    specs: list[WindowSpec] = []
    for entry in raw:
        params = tuple(ParameterId[name.upper()] for name in entry["parameters"])
        baseline = None
        if entry.get("baseline"):
            baseline = {}
            for name, rel in entry["baseline"].items():
                with open(path.parent / rel) as bfh:
                    baseline[ParameterId[name.upper()]] = histogram_from_dict(json.load(bfh))
        specs.append(
            WindowSpec(
                label=entry["label"],
                tau=entry["tau"],
                window_len=entry["window_len"],
                parameters=params,
                aggregator=Aggregator(entry.get("aggregator", "last")),
                fill=float(entry.get("fill", 0.0)),
                embed_dim=int(entry.get("embed_dim", 3)),
                embed_delay=int(entry.get("embed_delay", 1)),
                axes=tuple(entry.get("axes", (0, 1))),
                bins_per_axis=int(entry.get("bins_per_axis", 20)),
                baseline=baseline,
            )
        )
    return specs
