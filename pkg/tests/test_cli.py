"""CLI subcommands: happy paths, exit codes, and library equivalence."""

from __future__ import annotations

import io
import json

import pytest

from flowtrace.capture import load_pcap, parse_headers
from flowtrace.cli import main
from flowtrace.parameters import Aggregator, ParameterId, sample, write_series_csv
from flowtrace.signatures import DEFAULT_CONFIG, builtin_catalog, scan_packets
from flowtrace.synthgen import AttackEpisode, TrafficProfile, generate


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_corpus")
    pcap = root / "traffic.pcap"
    profile = TrafficProfile(seed=42, duration=10.0, rate=50.0)
    episodes = [AttackEpisode(kind="land", t_start=4.0, t_end=5.0, params={})]
    packets, manifest = generate(profile, episodes, out=pcap)
    series_csv = root / "series.csv"
    decoded = [(ts, parse_headers(frame)) for ts, frame in packets]
    series = sample(decoded, ParameterId.IP_PROTOCOL, 0.1, Aggregator.LAST, 0.0)
    with open(series_csv, "w") as fh:
        write_series_csv(series, fh)
    return {"root": root, "pcap": pcap, "series_csv": series_csv,
            "packets": packets, "decoded": decoded, "series": series}


# ------------------------------------------------------------------- extract


def test_extract_stdout_matches_library(corpus, capsys):
    rc = main(["extract", "--pcap", str(corpus["pcap"]), "--param", "IP_PROTOCOL",
               "--tau", "0.1"])
    out = capsys.readouterr().out
    assert rc == 0
    buf = io.StringIO()
    write_series_csv(corpus["series"], buf)
    assert out == buf.getvalue()


def test_extract_to_file_with_figure(corpus, tmp_path):
    out_csv = tmp_path / "s.csv"
    fig = tmp_path / "s.png"
    rc = main(["extract", "--pcap", str(corpus["pcap"]), "--param", "IP_LENGTH",
               "--tau", "0.5", "--agg", "mean", "--out", str(out_csv),
               "--fig", str(fig)])
    assert rc == 0
    assert out_csv.read_text().startswith("n,t_start_us,value")
    assert fig.stat().st_size > 1000
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_extract_jsonl_format(corpus, capsys):
    rc = main(["extract", "--pcap", str(corpus["pcap"]), "--param", "IP_PROTOCOL",
               "--tau", "1", "--format", "jsonl"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    first = json.loads(lines[0])
    assert set(first) == {"n", "t_start_us", "value"}


def test_extract_rejects_unknown_param(corpus):
    rc = main(["extract", "--pcap", str(corpus["pcap"]), "--param", "TTL",
               "--tau", "1"])
    assert rc == 1


def test_extract_bad_pcap_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"this is not a capture file")
    rc = main(["extract", "--pcap", str(bad), "--param", "IP_PROTOCOL", "--tau", "1"])
    assert rc == 2
    assert "BadMagic" in capsys.readouterr().err


def test_extract_missing_file_is_data_error(tmp_path):
    rc = main(["extract", "--pcap", str(tmp_path / "nope.pcap"),
               "--param", "IP_PROTOCOL", "--tau", "1"])
    assert rc == 2


def test_extract_invalid_tau_is_data_error(corpus, capsys):
    rc = main(["extract", "--pcap", str(corpus["pcap"]), "--param", "IP_PROTOCOL",
               "--tau", "-1"])
    assert rc == 2
    assert "InvalidTau" in capsys.readouterr().err


# ----------------------------------------------------------------------- fnn


def test_fnn_csv_and_estimate(corpus, tmp_path, capsys):
    out = tmp_path / "fnn.csv"
    rc = main(["fnn", "--series", str(corpus["series_csv"]), "--max-dim", "6",
               "--delay", "1", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "d,fraction,false_count,tested_count"
    assert len(lines) == 7
    err = capsys.readouterr().err
    assert "dimension" in err


def test_fnn_auto_delay_reported(corpus, capsys):
    rc = main(["fnn", "--series", str(corpus["series_csv"]), "--max-dim", "3"])
    assert rc == 0
    assert "auto delay" in capsys.readouterr().err


def test_fnn_figure(corpus, tmp_path):
    fig = tmp_path / "fnn.png"
    rc = main(["fnn", "--series", str(corpus["series_csv"]), "--max-dim", "4",
               "--delay", "1", "--out", str(tmp_path / "f.csv"), "--fig", str(fig)])
    assert rc == 0
    assert fig.stat().st_size > 1000


def test_fnn_degenerate_series_is_data_error(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    flat.write_text("n,t_start_us,value\n" +
                    "\n".join(f"{i},{i * 1000000},5.0" for i in range(50)) + "\n")
    rc = main(["fnn", "--series", str(flat), "--max-dim", "4", "--delay", "1"])
    assert rc == 2
    assert "DegenerateSeries" in capsys.readouterr().err


# ----------------------------------------------------------------- trajectory


def test_trajectory_outputs_and_gnuplot(corpus, tmp_path):
    prefix = tmp_path / "traj"
    rc = main(["trajectory", "--series", str(corpus["series_csv"]), "--dim", "3",
               "--delay", "1", "--axes", "0,1", "--bins", "10",
               "--out-prefix", str(prefix), "--emit-plot"])
    assert rc == 0
    projection_csv = tmp_path / "traj_projection.csv"
    occupancy_csv = tmp_path / "traj_occupancy.csv"
    occupancy_json = tmp_path / "traj_occupancy.json"
    script = tmp_path / "traj.gp"
    assert projection_csv.read_text().splitlines()[0] == "t_index,x,y"
    assert occupancy_csv.read_text().splitlines()[0] == "cell_index,mass"
    payload = json.loads(occupancy_json.read_text())
    assert payload["bins_per_axis"] == 10
    assert len(payload["mass"]) == 100
    text = script.read_text()
    assert "plot 'traj_projection.csv'" in text
    assert "using 2:3" in text


def test_trajectory_3d_figure(corpus, tmp_path):
    prefix = tmp_path / "t3"
    fig = tmp_path / "t3.png"
    rc = main(["trajectory", "--series", str(corpus["series_csv"]), "--dim", "4",
               "--axes", "0,1,2", "--out-prefix", str(prefix), "--fig", str(fig),
               "--emit-plot"])
    assert rc == 0
    assert "splot" in (tmp_path / "t3.gp").read_text()
    assert fig.stat().st_size > 1000


def test_trajectory_bad_axes_is_data_error(corpus, capsys):
    rc = main(["trajectory", "--series", str(corpus["series_csv"]),
               "--axes", "0,0", "--out-prefix", "/tmp/x"])
    assert rc == 2
    assert "BadAxes" in capsys.readouterr().err


# ----------------------------------------------------------------------- scan


def test_scan_matches_library(corpus, tmp_path):
    out = tmp_path / "alerts.jsonl"
    rc = main(["scan", "--pcap", str(corpus["pcap"]), "--out", str(out)])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    direct = scan_packets(corpus["decoded"], builtin_catalog(), DEFAULT_CONFIG)
    assert len(rows) == len(direct)
    assert [r["rule"] for r in rows] == [a.rule_name for a in direct]
    assert all(r["rule"] == "land" for r in rows)


def test_scan_frequency_only(tmp_path):
    freq = tmp_path / "freq.csv"
    rc = main(["scan", "--freq-out", str(freq)])
    assert rc == 0
    lines = freq.read_text().splitlines()
    assert lines[0] == "number,protocol,parameter,frequency"
    assert len(lines) == 18


def test_scan_without_inputs_is_usage_error(capsys):
    rc = main(["scan"])
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_scan_netmask_flag_changes_detection(tmp_path):
    from conftest import icmp_frame, pcap_bytes

    pcap = tmp_path / "b.pcap"
    pcap.write_bytes(pcap_bytes([(0, icmp_frame(icmp_type=8, dst="10.0.255.255"))]))
    out = tmp_path / "alerts.jsonl"
    assert main(["scan", "--pcap", str(pcap), "--netmask", "16",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 1 and json.loads(rows[0])["rule"] == "smurf"


# -------------------------------------------------------------------- monitor


def test_monitor_default_plan(corpus, tmp_path, capsys):
    out = tmp_path / "reports.jsonl"
    alerts = tmp_path / "alerts.jsonl"
    rc = main(["monitor", "--pcap", str(corpus["pcap"]), "--out", str(out),
               "--alerts", str(alerts)])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert rows
    labels = {r["label"] for r in rows}
    assert len(labels) == 3
    assert sum(r["alert_count"] for r in rows) >= 5 * len(labels)
    assert len(alerts.read_text().splitlines()) >= 5


def test_monitor_plan_file(corpus, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([
        {"label": "only", "tau": 1.0, "window_len": 5,
         "parameters": ["ip_protocol"]},
    ]))
    out = tmp_path / "reports.jsonl"
    rc = main(["monitor", "--pcap", str(corpus["pcap"]), "--plan", str(plan),
               "--out", str(out)])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert {r["label"] for r in rows} == {"only"}


def test_monitor_bad_plan_is_data_error(corpus, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([
        {"label": "broken", "tau": 0.0, "window_len": 5,
         "parameters": ["ip_protocol"]},
    ]))
    rc = main(["monitor", "--pcap", str(corpus["pcap"]), "--plan", str(plan)])
    assert rc == 2
    assert "broken" in capsys.readouterr().err


# ------------------------------------------------------------------------ gen


def test_gen_writes_parseable_pcap_and_manifest(tmp_path):
    out = tmp_path / "g.pcap"
    manifest = tmp_path / "m.json"
    rc = main(["gen", "--seed", "3", "--duration", "4", "--rate", "25",
               "--episode", "smurf:1:2", "--out", str(out),
               "--manifest", str(manifest)])
    assert rc == 0
    _, records = load_pcap(out)
    assert records
    entries = json.loads(manifest.read_text())
    assert entries and all(e["kind"] == "smurf" for e in entries)


def test_gen_cli_equals_library(tmp_path):
    out = tmp_path / "g.pcap"
    assert main(["gen", "--seed", "11", "--duration", "3", "--rate", "30",
                 "--out", str(out)]) == 0
    packets, _ = generate(TrafficProfile(seed=11, duration=3.0, rate=30.0), [])
    _, records = load_pcap(out)
    assert [(r.timestamp_us, r.payload) for r in records] == packets


def test_gen_episode_with_params(tmp_path):
    out = tmp_path / "g.pcap"
    manifest = tmp_path / "m.json"
    rc = main(["gen", "--seed", "5", "--duration", "6", "--rate", "20",
               "--episode", "land:1:2:count=7,port=8080",
               "--out", str(out), "--manifest", str(manifest)])
    assert rc == 0
    assert len(json.loads(manifest.read_text())) == 7


def test_gen_bad_episode_syntax_is_usage_error(tmp_path, capsys):
    rc = main(["gen", "--episode", "land", "--out", str(tmp_path / "x.pcap")])
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_gen_unknown_kind_is_data_error(tmp_path, capsys):
    rc = main(["gen", "--episode", "warphole:1:2", "--out", str(tmp_path / "x.pcap")])
    assert rc == 2
    assert "UnknownKind" in capsys.readouterr().err


# -------------------------------------------------------------------- general


def test_unknown_subcommand_usage_error(capsys):
    assert main(["transmogrify"]) == 1


def test_no_subcommand_usage_error(capsys):
    assert main([]) == 1
    assert "required" in capsys.readouterr().err


def test_missing_required_flag_usage_error():
    assert main(["extract", "--param", "IP_SRC", "--tau", "1"]) == 1
