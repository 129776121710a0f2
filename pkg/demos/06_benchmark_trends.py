#!/usr/bin/env python3
"""Feedback conditions head to head.

Forty trials: the four feedback settings each run the same ten seeds
against one shared guide path. Tactile feedback mostly fixes depth
misjudgment at the insertion moment; haptic guidance fixes tracking.
Together they dominate both columns.
"""

from pathlib import Path

from tims.analytics import Setting, summarize
from tims.session import run_benchmark

OUT = Path(__file__).parent / "out"


def main():
    seeds = list(range(10))
    print(f"running {len(Setting)} settings x {len(seeds)} seeds ...")
    trials = run_benchmark(seeds=seeds)
    rows = summarize(trials)

    print("\nsetting  rmse(um)  insertion(um)  time(s)  reminders")
    for s in Setting:
        r = rows[s]
        print(f"{s.value:7s}  {r.mean_trajectory_rmse_um:8.1f}  "
              f"{r.mean_insertion_error_um:13.1f}  {r.mean_time_cost_s:7.1f}  "
              f"{r.mean_reminder_count:9.2f}")

    nf = rows[Setting.NF].mean_trajectory_rmse_um
    hg = rows[Setting.HG].mean_trajectory_rmse_um
    print(f"\nhaptic guidance cuts tracking error by {(nf - hg) / nf:.0%} vs no feedback")
    nf_i = rows[Setting.NF].mean_insertion_error_um
    both_i = rows[Setting.TF_HG].mean_insertion_error_um
    print(f"both channels cut insertion error by {(nf_i - both_i) / nf_i:.0%}")
    print("safety reminders only ever fire without feedback "
          f"(NF mean {rows[Setting.NF].mean_reminder_count:.2f}/trial)")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    names = [s.value for s in Setting]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    ax1.bar(names, [rows[s].mean_trajectory_rmse_um for s in Setting])
    ax1.set_ylabel("trajectory RMSE (um)")
    ax2.bar(names, [rows[s].mean_insertion_error_um for s in Setting])
    ax2.set_ylabel("insertion error (um)")
    for ax in (ax1, ax2):
        ax.set_xlabel("feedback setting")
    fig.suptitle("ten matched seeds per setting")
    fig.tight_layout()
    fig.savefig(OUT / "06_trends.png", dpi=110)
    print(f"\nwrote {OUT / '06_trends.png'}")


if __name__ == "__main__":
    main()
