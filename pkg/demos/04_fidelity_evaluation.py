#!/usr/bin/env python3
"""Quantify how faithful (and how non-copying) the synthetic profiles are.

Three views: a PCA of real vs synthetic profiles in the length-64 normalized
representation, nearest-neighbor distances from each synthetic sample to the
real corpus, and a label-consistency score from a logistic classifier fitted
on the real data. Run 02 and 03 first.
"""

from pathlib import Path
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinegen import CarefulnessClass, SynthConfig, make_dataset, synthesize
from kinegen.cgan import GanModel
from kinegen.cli import load_autoencoder_checkpoint, load_gan_checkpoint
from kinegen.metrics import build_fidelity_report, write_fidelity_report

OUT = Path(__file__).parent / "output"
if not (OUT / "cgan.json").is_file():
    sys.exit("run 02_autoencoder_embeddings.py and 03_conditional_gan.py first")

corpus = make_dataset(SynthConfig(), seed=42)
ae_model, stats = load_autoencoder_checkpoint(OUT / "autoencoder.json")
gan = load_gan_checkpoint(OUT / "cgan.json")

synth = []
for label in CarefulnessClass:
    synth.extend(synthesize(gan, ae_model, label, 100, seed=20 + int(label),
                            stats=stats))

report = build_fidelity_report(corpus, synth)
print(f"label consistency: {report.label_accuracy:.3f}")
print("nearest-neighbor distance quantiles (synthetic -> real):")
for name, value in report.nn_quantiles.items():
    print(f"  {name}: {value:.4f}")
write_fidelity_report(report, OUT)
print(f"wrote report.json + csv files -> {OUT}")

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
colors = {("real", 0): "C0", ("real", 1): "C2", ("synth", 0): "C1", ("synth", 1): "C3"}
for (source, label), color in colors.items():
    pts = np.array([[p["x"], p["y"]] for p in report.pca_points
                    if p["source"] == source and p["label"] == label])
    marker = "o" if source == "real" else "x"
    axes[0].scatter(pts[:, 0], pts[:, 1], s=8, c=color, marker=marker,
                    alpha=0.5, label=f"{source} {CarefulnessClass(label).name.lower()}")
axes[0].set_title("PCA of real and synthetic profiles")
axes[0].legend(fontsize=8)

axes[1].hist(report.nn_distances, bins=30, color="C4")
axes[1].set_title("synthetic-to-real nearest-neighbor distance")
axes[1].set_xlabel("L2 distance (normalized length-64 space)")
fig.tight_layout()
fig.savefig(OUT / "04_fidelity.png", dpi=120)
print(f"wrote {OUT / '04_fidelity.png'}")
