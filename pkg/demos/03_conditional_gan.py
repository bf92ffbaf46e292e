#!/usr/bin/env python3
"""Adversarial training in latent space, then class-conditioned synthesis.

The generator and discriminator both receive the carefulness label through a
learned embedding multiplied into their inputs. The generator's loss adds a
strong (lambda = 100) L2 pull toward encodings of same-class real profiles,
which keeps the adversarial game stable at this scale. Run
02_autoencoder_embeddings.py first.
"""

from pathlib import Path
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinegen import (CarefulnessClass, GanTrainConfig, SynthConfig,
                     make_dataset, synthesize, train_gan)
from kinegen.cli import load_autoencoder_checkpoint
from kinegen.neural import save_checkpoint

OUT = Path(__file__).parent / "output"
ae_path = OUT / "autoencoder.json"
if not ae_path.is_file():
    sys.exit("run 02_autoencoder_embeddings.py first (needs its checkpoint)")

corpus = make_dataset(SynthConfig(), seed=42)
ae_model, stats = load_autoencoder_checkpoint(ae_path)

gan, history = train_gan(corpus, ae_model, GanTrainConfig(epochs=40), seed=3)
print(f"after {len(history)} epochs: d_loss {history[-1]['d_loss']:.3f}, "
      f"l2 term {history[-1]['l2_term']:.3f}")
save_checkpoint(OUT / "cgan.json", gan.params, "cgan", gan.config.to_dict())
print(f"wrote {OUT / 'cgan.json'}")

synth = {
    label: synthesize(gan, ae_model, label, 20, seed=10 + int(label), stats=stats)
    for label in CarefulnessClass
}
for label, batch in synth.items():
    peaks = [p.peak for p in batch]
    print(f"synthetic {label.name:12s} median peak {np.median(peaks):.3f} m/s")

fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex="col", sharey="row")
for col, label in enumerate((CarefulnessClass.NOT_CAREFUL, CarefulnessClass.CAREFUL)):
    for profile in corpus.by_class(label)[:12]:
        axes[0, col].plot(np.linspace(0, 1, profile.samples.size),
                          profile.samples, alpha=0.5, lw=1)
    for profile in synth[label][:12]:
        axes[1, col].plot(np.linspace(0, 1, profile.samples.size),
                          profile.samples, alpha=0.6, lw=1, color="C3")
    axes[0, col].set_title(f"real {label.name.replace('_', ' ').lower()}")
    axes[1, col].set_title(f"synthetic {label.name.replace('_', ' ').lower()}")
    axes[1, col].set_xlabel("normalized time")
axes[0, 0].set_ylabel("speed (m/s)")
axes[1, 0].set_ylabel("speed (m/s)")
fig.tight_layout()
fig.savefig(OUT / "03_real_vs_synthetic.png", dpi=120)
print(f"wrote {OUT / '03_real_vs_synthetic.png'}")
