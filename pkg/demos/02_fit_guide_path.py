#!/usr/bin/env python3
"""Fit a guide path from expert demonstrations.

Three synthetic expert passes hover above the phantom vessel; each is
deduplicated, resampled by arc length, and fed to the per-axis GP fit.
The posterior mean becomes the guide path and 1.96 sigma becomes the
confidence band that later bounds how much the guidance dead zone is
allowed to trust the path.
"""

from pathlib import Path

import numpy as np

from tims import lfd
from tims.operators import expert_demonstrations, hover_curve
from tims.phantom import default_phantom

OUT = Path(__file__).parent / "out"


def main():
    phantom = default_phantom()
    raw_demos = expert_demonstrations(phantom, standoff_um=200.0, n_demos=3, seed=7)
    print(f"generated {len(raw_demos)} expert passes, "
          f"{raw_demos[0].shape[0]} raw points each")

    demos = [lfd.preprocess(points, n=200, source_id=f"demo-{i}")
             for i, points in enumerate(raw_demos)]
    model, guide = lfd.fit(lfd.DemonstrationSet(demos=demos))

    print("\nper-axis hyperparameters picked by marginal likelihood:")
    for name, gp in zip("xyz", model.axes):
        h = gp.hyp
        print(f"  {name}: length_scale={h.length_scale:7.2f}  "
              f"signal_var={h.signal_variance:12.1f}  noise_var={h.noise_variance:10.4g}")

    ideal = hover_curve(phantom, standoff_um=200.0)
    rmse = float(np.sqrt(np.mean(np.sum((guide.points - ideal) ** 2, axis=1))))
    ci = guide.ci_halfwidth
    print(f"\nguide path: {len(guide)} points")
    print(f"distance from the ideal hover curve: {rmse:.1f} um RMSE")
    print(f"CI half-width: max {ci.max():.1f} um, mean {ci.mean():.1f} um")
    print("(the demos wobble around the ideal curve, the fit averages that out)")

    mid = model.predict(float(len(guide) // 2))
    print(f"\nposterior at the middle index: mean=({mid[0].x:.0f}, {mid[0].y:.0f}, "
          f"{mid[0].z:.0f}) um, ci=({mid[1].x:.1f}, {mid[1].y:.1f}, {mid[1].z:.1f}) um")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    for i, d in enumerate(demos):
        ax1.plot(d.points[:, 0], d.points[:, 2], lw=0.7, alpha=0.6,
                 label=f"demo {i}" if i == 0 else None)
    ax1.plot(guide.points[:, 0], guide.points[:, 2], "k", lw=1.6, label="guide mean")
    ax1.set_xlabel("x (um)")
    ax1.set_ylabel("z (um)")
    ax1.set_title("hover passes and fitted guide (x-z)")
    ax1.legend()
    idx = np.arange(len(guide))
    ax2.plot(idx, guide.points[:, 1], "k", lw=1.2)
    ax2.fill_between(idx, guide.points[:, 1] - ci[:, 1],
                     guide.points[:, 1] + ci[:, 1], alpha=0.3)
    for d in demos:
        ax2.plot(idx, d.points[:, 1], lw=0.5, alpha=0.5)
    ax2.set_xlabel("path index")
    ax2.set_ylabel("y (um)")
    ax2.set_title("y axis with 95% band")
    fig.tight_layout()
    fig.savefig(OUT / "02_guide_fit.png", dpi=110)
    print(f"\nwrote {OUT / '02_guide_fit.png'}")


if __name__ == "__main__":
    main()
