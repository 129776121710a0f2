#!/usr/bin/env python3
"""Record a trial, replay the log, get the same numbers back.

The broker writes every accepted envelope to a session log. Reading that
file back and batch-replaying it into a fresh broker reproduces the
downstream metrics exactly, which is what makes offline analysis and
regression debugging trustworthy. Finishes with a loopback latency probe
over the real TCP transport.
"""

import math
from pathlib import Path

from tims.analytics import Setting, metrics_from_log
from tims.bus import Broker, SessionLog, replay
from tims.netserve import measure_rtt
from tims.session import SessionConfig, run_trial

OUT = Path(__file__).parent / "out"


def main():
    OUT.mkdir(exist_ok=True)
    cfg = SessionConfig(setting=Setting.TF_HG, seed=4)
    print(f"running one {cfg.setting.value} trial, seed {cfg.seed}, recording ...")
    live = run_trial(cfg, record=True)
    m = live.metrics
    print(f"  rmse {m.trajectory_rmse_um:.1f} um, time {m.time_cost_s:.1f} s, "
          f"insertions {[round(e, 1) for e in m.insertion_errors_um]}")

    log_path = OUT / "trial.jsonl"
    live.log.write(log_path)
    size = log_path.stat().st_size
    print(f"\nwrote {log_path} ({len(live.log.entries)} envelopes, {size} bytes)")

    loaded = SessionLog.read(log_path)
    target_log = SessionLog(session_id="replayed")
    target = Broker(log=target_log)
    n = replay(loaded, target, speed=math.inf)
    print(f"batch-replayed {n} envelopes into a fresh broker")

    again = metrics_from_log(target_log, live.guide)
    print("\nmetric                 live        replayed")
    print(f"rmse (um)        {m.trajectory_rmse_um:10.4f}  {again.trajectory_rmse_um:10.4f}")
    print(f"time (s)         {m.time_cost_s:10.4f}  {again.time_cost_s:10.4f}")
    print(f"reminders        {m.reminder_count:10d}  {again.reminder_count:10d}")
    print(f"identical: {again == m}")

    print("\nloopback echo over TCP, 300 round trips:")
    s = measure_rtt(300)
    print(f"  min {s.min_ms:.3f} ms, median {s.median_ms:.3f} ms, "
          f"p99 {s.p99_ms:.3f} ms, timeouts {s.timeouts}")


if __name__ == "__main__":
    main()
