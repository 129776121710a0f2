"""End-to-end checks for the command-line front end.

Runs the subcommand pipeline the way a user would: record demos, fit a
guide, run a trial with recording, then rebuild the metrics offline and
replay the log into a live bus.
"""

import json
import shutil
import subprocess

import numpy as np
import pytest

from tims import lfd
from tims.bus import Broker, SessionLog
from tims.cli import main
from tims.netserve import TcpBusServer


CONFIG_TOML = """\
setting = "HG"
seed = 1
trial_id = "cli-trial"
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """demo-record -> fit-guide -> run --record, all through main()."""
    root = tmp_path_factory.mktemp("cli")
    demo_dir = root / "demos"
    rc = main(["demo-record", "-o", str(demo_dir), "--count", "3",
               "--resample", "80", "--seed", "7"])
    assert rc == 0
    demo_files = sorted(demo_dir.glob("demo-*.jsonl"))
    assert len(demo_files) == 3

    guide_path = root / "guide.json"
    rc = main(["fit-guide", *map(str, demo_files), "--resample", "80",
               "-o", str(guide_path)])
    assert rc == 0

    cfg_path = root / "cfg.toml"
    cfg_path.write_text(CONFIG_TOML, encoding="utf-8")
    log_path = root / "run.jsonl"
    metrics_path = root / "metrics.json"
    rc = main(["run", "--config", str(cfg_path), "--guide", str(guide_path),
               "--record", str(log_path), "--metrics-json", str(metrics_path)])
    assert rc == 0
    return {
        "root": root,
        "demos": demo_files,
        "guide": guide_path,
        "log": log_path,
        "metrics": metrics_path,
    }


def test_demo_record_files_load_back(pipeline):
    for i, path in enumerate(pipeline["demos"]):
        points, source_id = lfd.load_demo_points(path)
        assert points.shape == (80, 3)
        assert np.all(np.isfinite(points))
        assert source_id == f"demo-{i:02d}"


def test_demo_record_is_deterministic(pipeline, tmp_path):
    rc = main(["demo-record", "-o", str(tmp_path), "--count", "1",
               "--resample", "80", "--seed", "7"])
    assert rc == 0
    again, _ = lfd.load_demo_points(tmp_path / "demo-00.jsonl")
    first, _ = lfd.load_demo_points(pipeline["demos"][0])
    assert np.array_equal(again, first)


def test_fit_guide_output_matches_demo_resolution(pipeline):
    guide = lfd.load_guidepath(pipeline["guide"])
    assert len(guide) == 80
    assert np.all(np.isfinite(guide.points))
    assert np.all(guide.ci_halfwidth >= 0)


def test_run_records_parseable_log(pipeline):
    log = SessionLog.read(pipeline["log"])
    devices = {env.device_id for _, env in log.entries}
    assert "follower" in devices
    assert "trial" in devices


def test_run_metrics_json(pipeline):
    obj = json.loads(pipeline["metrics"].read_text(encoding="utf-8"))
    assert obj["trial_id"] == "cli-trial"
    assert obj["setting"] == "HG"
    assert obj["trajectory_rmse_um"] > 0
    assert obj["reminder_count"] == 0


def test_analyze_reproduces_live_metrics(pipeline, tmp_path):
    out = tmp_path / "rebuilt.json"
    rc = main(["analyze", str(pipeline["log"]), "--guide", str(pipeline["guide"]),
               "-o", str(out)])
    assert rc == 0
    rebuilt = json.loads(out.read_text(encoding="utf-8"))
    live = json.loads(pipeline["metrics"].read_text(encoding="utf-8"))
    # Offline recomputation from the log must agree exactly, not just closely.
    assert rebuilt == live
    csv_text = (tmp_path / "rebuilt.csv").read_text(encoding="utf-8")
    assert csv_text.splitlines()[0] == "trial,setting,rmse_um,insertion_um,time_s,reminders"
    assert "cli-trial" in csv_text


def test_replay_batch_into_live_bus(pipeline):
    log = SessionLog.read(pipeline["log"])
    broker = Broker(validate=False)
    server = TcpBusServer(broker, port=0)
    sub = broker.subscribe(latest_first=False, capacity=len(log.entries) + 10)
    try:
        rc = main(["replay", str(pipeline["log"]), "--batch",
                   "--port", str(server.port)])
        assert rc == 0
        got = []
        while len(got) < len(log.entries):
            env = sub.get(timeout=5.0)
            assert env is not None, "bus delivered fewer envelopes than the log holds"
            got.append(env)
    finally:
        broker.unsubscribe(sub)
        server.close()
    assert [e.device_id for e in got] == [e.device_id for _, e in log.entries]
    assert [e.payload for e in got] == [e.payload for _, e in log.entries]


def test_run_missing_config(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "nope.toml")])
    assert rc == 1
    assert "config file not found" in capsys.readouterr().err


def test_run_rejects_bad_setting_in_config(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('setting = "XX"\n', encoding="utf-8")
    rc = main(["run", "--config", str(cfg)])
    assert rc == 1
    assert "bad config" in capsys.readouterr().err


def test_fit_guide_missing_demo(tmp_path, capsys):
    rc = main(["fit-guide", str(tmp_path / "nope.jsonl")])
    assert rc == 1
    assert "demo file not found" in capsys.readouterr().err


def test_analyze_missing_log(tmp_path, capsys):
    rc = main(["analyze", str(tmp_path / "nope.jsonl")])
    assert rc == 1
    assert "log file not found" in capsys.readouterr().err


def test_replay_missing_log(tmp_path, capsys):
    rc = main(["replay", str(tmp_path / "nope.jsonl")])
    assert rc == 1
    assert "log file not found" in capsys.readouterr().err


def test_replay_rejects_nonpositive_speed(pipeline, capsys):
    rc = main(["replay", str(pipeline["log"]), "--speed", "0"])
    assert rc == 1
    assert "speed must be > 0" in capsys.readouterr().err


def test_help_and_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_console_script_installed():
    exe = shutil.which("tims")
    assert exe is not None, "console script not on PATH; install with pip -e"
    out = subprocess.run([exe, "--help"], capture_output=True, text=True, timeout=60)
    assert out.returncode == 0
    assert "run" in out.stdout and "serve" in out.stdout
