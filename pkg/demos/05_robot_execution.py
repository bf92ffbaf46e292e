#!/usr/bin/env python3
"""Time-parameterize profiles onto straight paths and simulate execution.

Two discretization regimes stand in for the two robots: fixed 1 cm spatial
steps with computed arrival times (baxter-like, 0.60 m paths) and fixed 50 ms
time steps with computed distances (icub-like, ~0.30 m paths). Each selected
profile runs ten times per plane under an actuator model with a speed cap,
an acceleration cap, and a first-order tracking lag.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinegen import (CarefulnessClass, SynthConfig, make_dataset, make_path,
                     rescale_profile, builtin_presets, repeat_runs)
from kinegen.trajectory import (executed_speed, simulate_execution,
                                spatial_waypoints, temporal_waypoints)
from kinegen.rng import rng_for

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

corpus = make_dataset(SynthConfig(), seed=42)
rng = rng_for(42, "demo-selection")
chosen = {}
for label in CarefulnessClass:
    pool = corpus.by_class(label)
    chosen[label] = [pool[int(i)] for i in rng.choice(len(pool), 3, replace=False)]

presets = builtin_presets()
planes = ("frontal", "sagittal", "oblique")

print("median Pearson r between planned and executed speed, 10 reps per cell:")
summary = {}
for preset_name in ("baxter-like", "icub-like"):
    preset = presets[preset_name]
    for label, profiles in chosen.items():
        rs = []
        for profile in profiles:
            for plane in planes:
                path = make_path(plane, preset.path_length_for(plane))
                metrics, stats = repeat_runs(
                    profile, path, preset.actuator, n=10,
                    seed=int(rng.integers(0, 2**31)), regime=preset.regime,
                    ds=preset.ds, dt_step=preset.dt_step,
                    noise_sd=preset.noise_sd)
                rs.extend(m.pearson_r for m in metrics)
        summary[(preset_name, label)] = float(np.median(rs))
        print(f"  {preset_name:12s} {label.name:12s} median r = {np.median(rs):.4f}")

# one detailed figure: a NotCareful profile on the baxter-like preset
preset = presets["baxter-like"]
profile = chosen[CarefulnessClass.NOT_CAREFUL][0]
fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharey=True)
for ax, plane in zip(axes, planes):
    path = make_path(plane, preset.path_length_for(plane))
    planned = rescale_profile(profile, path.length)
    wp = spatial_waypoints(planned, path, preset.ds)
    runs = []
    for rep in range(10):
        trace = simulate_execution(wp, preset.actuator, noise_seed=rep,
                                   noise_sd=preset.noise_sd)
        runs.append(executed_speed(trace))
    grid = runs[0].times
    stack = np.stack([np.interp(grid, r.times, r.samples) for r in runs])
    mean, sd = stack.mean(0), stack.std(0)
    ax.plot(planned.times, planned.samples, "k--", label="planned")
    ax.plot(grid, mean, "C0", label="executed (mean)")
    ax.fill_between(grid, mean - sd, mean + sd, color="C0", alpha=0.3)
    ax.set_title(plane)
    ax.set_xlabel("time (s)")
axes[0].set_ylabel("speed (m/s)")
axes[0].legend()
fig.suptitle("baxter-like execution of a NotCareful profile, 10 repetitions")
fig.tight_layout()
fig.savefig(OUT / "05_execution.png", dpi=120)
print(f"wrote {OUT / '05_execution.png'}")
