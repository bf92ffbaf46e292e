"""Recurrent autoencoder between velocity time series and latent sequences.

Pretraining stage of the two-step pipeline: the encoder maps a normalized
length-N profile to a per-timestep latent sequence (N x E), the decoder maps
it back. The adversarial stage later runs entirely in this latent space with
the autoencoder frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import NumericalError, ShapeError
from .neural import (AdamHyper, AdamState, ParamSet, adam_step, dense_backward,
                     dense_forward, init_dense, init_lstm, lstm_backward,
                     lstm_forward)
from .profiles import DEFAULT_DT, ProfileCorpus, VelocityProfile, normalize, resample
from .rng import rng_for

# A latent sequence is a plain (N, E) float array
LatentSequence = np.ndarray


@dataclass(frozen=True)
class AutoencoderConfig:
    n_steps: int = 64
    latent_dim: int = 8
    hidden_dim: int = 32

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class AutoencoderModel:
    params: ParamSet
    config: AutoencoderConfig


def init_autoencoder(config: AutoencoderConfig, rng: np.random.Generator) -> AutoencoderModel:
    params = ParamSet()
    init_lstm(params, "enc.lstm", rng, 1, config.hidden_dim)
    init_dense(params, "enc.head", rng, config.hidden_dim, config.latent_dim)
    init_lstm(params, "dec.lstm", rng, config.latent_dim, config.hidden_dim)
    init_dense(params, "dec.head", rng, config.hidden_dim, 1)
    return AutoencoderModel(params, config)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def encode_batch(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """Encode a batch (B, N, 1) of normalized profiles to latents (B, N, E)."""
    p = model.params
    hs, _ = lstm_forward(p["enc.lstm.wx"], p["enc.lstm.wh"], p["enc.lstm.b"], x)
    z, _ = dense_forward(p["enc.head.w"], p["enc.head.b"], hs, "tanh")
    return z


def decode_batch(model: AutoencoderModel, z: np.ndarray) -> np.ndarray:
    """Decode latents (B, N, E) back to normalized profiles (B, N, 1)."""
    p = model.params
    hs, _ = lstm_forward(p["dec.lstm.wx"], p["dec.lstm.wh"], p["dec.lstm.b"], z)
    y, _ = dense_forward(p["dec.head.w"], p["dec.head.b"], hs, "sigmoid")
    return y


def encode(model: AutoencoderModel, profile: VelocityProfile) -> LatentSequence:
    """Per-timestep latent sequence (N, E) of one normalized length-N profile."""
    n = model.config.n_steps
    if profile.samples.size != n:
        raise ShapeError(f"encoder expects length {n}, got {profile.samples.size}")
    x = profile.samples.reshape(1, n, 1)
    return encode_batch(model, x)[0]


def decode(model: AutoencoderModel, latent: LatentSequence,
           dt: float = DEFAULT_DT) -> VelocityProfile:
    """Normalized profile (samples in (0, 1)) reconstructed from a latent."""
    latent = np.asarray(latent, dtype=np.float64)
    expected = (model.config.n_steps, model.config.latent_dim)
    if latent.shape != expected:
        raise ShapeError(f"decoder expects latent shape {expected}, got {latent.shape}")
    y = decode_batch(model, latent[None, :, :])
    return VelocityProfile(y[0, :, 0], dt)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def ae_loss_and_grads(params: ParamSet, config: AutoencoderConfig, x: np.ndarray):
    """Mean squared reconstruction error and its gradients for a batch.

    Exposed at module level so the finite-difference checker can drive the
    exact code path used in training.
    """
    hs_e, cache_e = lstm_forward(params["enc.lstm.wx"], params["enc.lstm.wh"],
                                 params["enc.lstm.b"], x)
    z, zcache = dense_forward(params["enc.head.w"], params["enc.head.b"], hs_e, "tanh")
    hs_d, cache_d = lstm_forward(params["dec.lstm.wx"], params["dec.lstm.wh"],
                                 params["dec.lstm.b"], z)
    recon, rcache = dense_forward(params["dec.head.w"], params["dec.head.b"], hs_d, "sigmoid")

    diff = recon - x
    loss = float(np.mean(diff * diff))

    grads = ParamSet()
    drecon = 2.0 * diff / diff.size
    dw, db, dhs_d = dense_backward(params["dec.head.w"], rcache, drecon)
    grads.add("dec.head.w", dw)
    grads.add("dec.head.b", db)
    dwx, dwh, dbl, dz = lstm_backward(params["dec.lstm.wx"], params["dec.lstm.wh"],
                                      cache_d, dhs_d)
    grads.add("dec.lstm.wx", dwx)
    grads.add("dec.lstm.wh", dwh)
    grads.add("dec.lstm.b", dbl)
    dw, db, dhs_e = dense_backward(params["enc.head.w"], zcache, dz)
    grads.add("enc.head.w", dw)
    grads.add("enc.head.b", db)
    dwx, dwh, dbl, _ = lstm_backward(params["enc.lstm.wx"], params["enc.lstm.wh"],
                                     cache_e, dhs_e)
    grads.add("enc.lstm.wx", dwx)
    grads.add("enc.lstm.wh", dwh)
    grads.add("enc.lstm.b", dbl)

    ordered = ParamSet()
    for name in params.names():
        ordered.add(name, grads[name])
    return loss, ordered


def corpus_matrix(corpus: ProfileCorpus, n_steps: int):
    """Resample + normalize every profile; returns (X, labels, train_idx, held_idx).

    X has shape (n_profiles, n_steps, 1) in normalized units.
    """
    rows = []
    labels = []
    for profile in corpus.profiles:
        prepared = normalize(resample(profile, n_steps), corpus.normalization)
        rows.append(prepared.samples)
        labels.append(-1 if profile.label is None else int(profile.label))
    x = np.asarray(rows)[:, :, None]
    return x, np.asarray(labels), list(corpus.train_indices), list(corpus.heldout_indices)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    adam: AdamHyper = AdamHyper()


def train_autoencoder(corpus: ProfileCorpus, cfg: TrainConfig | None = None,
                      seed: int = 0,
                      model_config: AutoencoderConfig | None = None):
    """Train on the corpus training split; select the best held-out epoch.

    Returns (model, history) where history is one dict per epoch with keys
    epoch/train_mse/heldout_mse. With an empty held-out split, selection
    falls back to the training loss.
    """
    cfg = cfg or TrainConfig()
    model_config = model_config or AutoencoderConfig()
    if len(corpus.profiles) == 0:
        raise ValueError("corpus is empty")
    if cfg.epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {cfg.epochs}")
    if cfg.batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {cfg.batch_size}")

    x_all, _, train_idx, held_idx = corpus_matrix(corpus, model_config.n_steps)
    x_train = x_all[train_idx]
    x_held = x_all[held_idx] if held_idx else None

    model = init_autoencoder(model_config, rng_for(seed, "ae-init"))
    shuffle_rng = rng_for(seed, "ae-batches")
    state = AdamState.zeros(model.params)

    history = []
    best_params = model.params.copy()
    best_score = np.inf
    n_train = x_train.shape[0]

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n_train)
        sq_sum = 0.0
        n_seen = 0
        for start in range(0, n_train, cfg.batch_size):
            batch = x_train[order[start:start + cfg.batch_size]]
            loss, grads = ae_loss_and_grads(model.params, model_config, batch)
            if not np.isfinite(loss):
                raise NumericalError(f"autoencoder loss became non-finite at epoch {epoch}")
            model.params, state = adam_step(model.params, grads, state, cfg.adam)
            sq_sum += loss * batch.shape[0]
            n_seen += batch.shape[0]
        train_mse = sq_sum / n_seen

        if x_held is not None:
            recon = decode_batch(model, encode_batch(model, x_held))
            heldout_mse = float(np.mean((recon - x_held) ** 2))
        else:
            heldout_mse = train_mse
        history.append({"epoch": epoch, "train_mse": train_mse, "heldout_mse": heldout_mse})

        if heldout_mse < best_score:
            best_score = heldout_mse
            best_params = model.params.copy()

    model.params = best_params
    return model, history


def reconstruction_error(model: AutoencoderModel, profiles) -> float:
    """RMSE between normalized inputs and their decode(encode(.)) round trip."""
    if isinstance(profiles, VelocityProfile):
        profiles = [profiles]
    x = np.asarray([p.samples for p in profiles])[:, :, None]
    if x.shape[1] != model.config.n_steps:
        raise ShapeError(f"profiles must have length {model.config.n_steps}, "
                         f"got {x.shape[1]}")
    recon = decode_batch(model, encode_batch(model, x))
    return float(np.sqrt(np.mean((recon - x) ** 2)))


def write_training_log(history, path) -> None:
    """CSV log, one row per epoch: epoch,train_mse,heldout_mse."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,train_mse,heldout_mse\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['train_mse']!r},{row['heldout_mse']!r}\n")
