#!/usr/bin/env python3
"""Pretrain the recurrent autoencoder and inspect its reconstructions.

The encoder turns each length-64 normalized profile into a 64 x 8 latent
sequence; the decoder maps it back. This embedding space is where the
adversarial training will happen later, so reconstruction quality caps
everything downstream.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinegen import SynthConfig, make_dataset, normalize, resample
from kinegen import TrainConfig, reconstruction_error, train_autoencoder
from kinegen.autoencoder import decode_batch, encode_batch
from kinegen.neural import save_checkpoint

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

corpus = make_dataset(SynthConfig(), seed=42)
model, history = train_autoencoder(corpus, TrainConfig(epochs=40), seed=7)

heldout = [normalize(resample(p, 64), corpus.normalization)
           for p in corpus.heldout_profiles()]
print(f"held-out reconstruction RMSE after {len(history)} epochs: "
      f"{reconstruction_error(model, heldout):.4f} (normalized units)")

save_checkpoint(OUT / "autoencoder.json", model.params, "autoencoder", {
    **model.config.to_dict(),
    "normalization": {"min": corpus.normalization.min,
                      "max": corpus.normalization.max},
})
print(f"wrote {OUT / 'autoencoder.json'}")

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
x = np.array([p.samples for p in heldout[:4]])[:, :, None]
recon = decode_batch(model, encode_batch(model, x))
for i in range(4):
    axes[0].plot(x[i, :, 0], color=f"C{i}", lw=1.5)
    axes[0].plot(recon[i, :, 0], color=f"C{i}", ls="--", lw=1.5)
axes[0].set_title("held-out profiles (solid) vs reconstructions (dashed)")
axes[0].set_xlabel("step")
axes[0].set_ylabel("normalized speed")

epochs = [h["epoch"] for h in history]
axes[1].semilogy(epochs, [h["train_mse"] for h in history], label="train")
axes[1].semilogy(epochs, [h["heldout_mse"] for h in history], label="held-out")
axes[1].set_title("reconstruction loss")
axes[1].set_xlabel("epoch")
axes[1].set_ylabel("MSE")
axes[1].legend()
fig.tight_layout()
fig.savefig(OUT / "02_autoencoder.png", dpi=120)
print(f"wrote {OUT / '02_autoencoder.png'}")
