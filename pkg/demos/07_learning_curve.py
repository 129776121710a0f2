#!/usr/bin/env python3
"""A practice curriculum under guidance.

Ten guided trials where the trainee's perception error shrinks by a
factor of 0.85 each round, the way repetition tightens hand-eye skill.
The rolling mean of the tracking error drops steeply over the first few
rounds and then flattens; per-trial numbers still bounce (each round is
a new seed).
"""

from pathlib import Path

from tims.session import run_learning_curve

OUT = Path(__file__).parent / "out"


def main():
    print("running 10 guided trials, skill factor 0.85 per round ...")
    curve = run_learning_curve(n_trials=10, gamma=0.85, seed=0)
    raw = curve.rmse_series()
    rolled = curve.rolling_mean_rmse()

    print("\nround  rmse(um)  rolling mean (window 3)")
    for i, (r, roll) in enumerate(zip(raw, rolled), start=1):
        bar = "#" * int(roll / 8)
        print(f"{i:5d}  {r:8.1f}  {roll:8.1f}  {bar}")

    drops = [rolled[i] - rolled[i - 1] for i in range(4, len(rolled))]
    print(f"\nrolling mean after round 4: "
          f"{'never rises' if all(d <= 1e-9 for d in drops) else 'rises!'}")
    print(f"round 1 -> 10 rolling mean: {rolled[0]:.1f} -> {rolled[-1]:.1f} um")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    rounds = range(1, len(raw) + 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(rounds, raw, "o-", lw=1.0, alpha=0.6, label="per trial")
    ax.plot(rounds, rolled, lw=2.0, label="rolling mean (3)")
    ax.axvline(4, ls=":", c="gray")
    ax.annotate("stabilizes", (4.1, max(raw) * 0.9))
    ax.set_xlabel("round")
    ax.set_ylabel("trajectory RMSE (um)")
    ax.set_title("guided practice curriculum")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "07_learning_curve.png", dpi=110)
    print(f"\nwrote {OUT / '07_learning_curve.png'}")


if __name__ == "__main__":
    main()
