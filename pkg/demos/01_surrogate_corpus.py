#!/usr/bin/env python3
"""Build the surrogate transport-movement corpus and look at its two classes.

Each profile is the tangential speed of a simulated hand transport, sampled
at 22 Hz: a minimum-jerk bell plus a little smoothed noise. Careful movements
(delicate object) are slower and longer than NotCareful ones, and the two
peak ranges are disjoint by construction.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinegen import CarefulnessClass, SynthConfig, make_dataset, save_corpus
from kinegen.metrics import class_stats

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

corpus = make_dataset(SynthConfig(), seed=42)
print(f"corpus: {len(corpus)} profiles "
      f"({len(corpus.by_class(CarefulnessClass.NOT_CAREFUL))} not-careful, "
      f"{len(corpus.by_class(CarefulnessClass.CAREFUL))} careful)")
print(f"train/held-out split: {len(corpus.train_indices)}/{len(corpus.heldout_indices)}")
print(f"normalization stats from the training split: {corpus.normalization}")

stats = class_stats(corpus.profiles)
for label, entry in stats.items():
    print(f"{label.name:12s} peak {entry['peak']['median']:.3f} m/s (median), "
          f"duration {entry['duration']['median']:.2f} s (median)")

save_corpus(corpus, OUT / "corpus.csv", seed=42, config=SynthConfig().to_dict())
print(f"wrote {OUT / 'corpus.csv'}")

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for ax, label in zip(axes, (CarefulnessClass.NOT_CAREFUL, CarefulnessClass.CAREFUL)):
    for profile in corpus.by_class(label)[:15]:
        ax.plot(profile.times, profile.samples, alpha=0.5, lw=1)
    ax.set_title(label.name.replace("_", " ").title())
    ax.set_xlabel("time (s)")
axes[0].set_ylabel("speed (m/s)")
fig.tight_layout()
fig.savefig(OUT / "01_corpus_classes.png", dpi=120)
print(f"wrote {OUT / '01_corpus_classes.png'}")
