"""Conditional GAN over the autoencoder's latent space.

Generator and discriminator are both recurrent and both receive the class
label through a learned embedding vector multiplied elementwise into their
input steps. The generator loss combines the adversarial term with a strong
(lambda = 100) L2 pull toward encodings of same-class real profiles; at
inference the frozen decoder turns generated latents back into profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .autoencoder import AutoencoderModel, corpus_matrix, decode_batch, encode_batch
from .errors import BatchError, ConfigError, NumericalError, ShapeError
from .neural import (AdamHyper, AdamState, ParamSet, adam_step, bce, bce_dlogit,
                     dense_backward, dense_forward, init_dense, init_lstm,
                     lstm_backward, lstm_forward, sigmoid)
from .profiles import (DEFAULT_DT, CarefulnessClass, NormStats, ProfileCorpus,
                       VelocityProfile, denormalize)
from .rng import rng_for


@dataclass(frozen=True)
class GanConfig:
    n_steps: int = 64
    noise_dim: int = 8
    latent_dim: int = 8
    gen_hidden: int = 32
    disc_hidden: int = 32
    lambda_l2: float = 100.0

    def __post_init__(self):
        if self.lambda_l2 <= 0:
            raise ConfigError(f"lambda_l2 must be > 0, got {self.lambda_l2}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class GanModel:
    params: ParamSet
    config: GanConfig


def init_gan(config: GanConfig, rng: np.random.Generator) -> GanModel:
    params = ParamSet()
    params.add("gen.emb", rng.uniform(0.5, 1.5, size=(2, config.noise_dim)))
    init_lstm(params, "gen.lstm", rng, config.noise_dim, config.gen_hidden)
    init_dense(params, "gen.head", rng, config.gen_hidden, config.latent_dim)
    params.add("disc.emb", rng.uniform(0.5, 1.5, size=(2, config.noise_dim)))
    init_dense(params, "disc.proj", rng, config.latent_dim, config.noise_dim)
    init_lstm(params, "disc.lstm", rng, config.noise_dim, config.disc_hidden)
    init_dense(params, "disc.head", rng, config.disc_hidden, 1)
    return GanModel(params, config)


# ---------------------------------------------------------------------------
# label conditioning
# ---------------------------------------------------------------------------

def label_vectors(table: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample class vectors (B, Z) from an embedding table (2, Z).

    Integer labels pick a row; a float label in [0, 1] interpolates linearly
    between the two rows, which is what makes "intermediate" classes
    expressible (no validity claim attaches to non-integer labels).
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    return (1.0 - y)[:, None] * table[0] + y[:, None] * table[1]


def condition_input(z: np.ndarray, y, emb: np.ndarray) -> np.ndarray:
    """Multiply the class vector elementwise into every noise step.

    z has shape (N, Z) and emb is the (2, Z) label-embedding table.
    """
    z = np.asarray(z, dtype=np.float64)
    emb = np.asarray(emb, dtype=np.float64)
    if z.ndim != 2 or emb.ndim != 2 or emb.shape[0] != 2:
        raise ShapeError(f"expected z (N, Z) and emb (2, Z), got {z.shape} and {emb.shape}")
    if z.shape[1] != emb.shape[1]:
        raise ShapeError(f"noise width {z.shape[1]} != embedding width {emb.shape[1]}")
    v = label_vectors(emb, np.asarray([float(y)]))[0]
    return z * v


# ---------------------------------------------------------------------------
# batched forward/backward
# ---------------------------------------------------------------------------

def _gen_forward(params: ParamSet, z: np.ndarray, y: np.ndarray):
    """Generator pass: noise (B, N, Z) + labels (B,) -> latents (B, N, E)."""
    v = label_vectors(params["gen.emb"], y)
    zc = z * v[:, None, :]
    hs, lstm_cache = lstm_forward(params["gen.lstm.wx"], params["gen.lstm.wh"],
                                  params["gen.lstm.b"], zc)
    out, head_cache = dense_forward(params["gen.head.w"], params["gen.head.b"], hs, "tanh")
    cache = {"z": z, "y": y, "v": v, "lstm": lstm_cache, "head": head_cache}
    return out, cache


def _gen_backward(params: ParamSet, cache: dict, dout: np.ndarray) -> ParamSet:
    """Gradients of the generator parameters given d(loss)/d(latent output)."""
    grads = ParamSet()
    dw, db, dhs = dense_backward(params["gen.head.w"], cache["head"], dout)
    dwx, dwh, dbl, dzc = lstm_backward(params["gen.lstm.wx"], params["gen.lstm.wh"],
                                       cache["lstm"], dhs)
    dv = (dzc * cache["z"]).sum(axis=1)  # (B, Z)
    y = np.asarray(cache["y"], dtype=np.float64).reshape(-1)
    demb = np.zeros_like(params["gen.emb"])
    demb[0] = ((1.0 - y)[:, None] * dv).sum(axis=0)
    demb[1] = (y[:, None] * dv).sum(axis=0)
    grads.add("gen.emb", demb)
    grads.add("gen.lstm.wx", dwx)
    grads.add("gen.lstm.wh", dwh)
    grads.add("gen.lstm.b", dbl)
    grads.add("gen.head.w", dw)
    grads.add("gen.head.b", db)
    return grads


def _disc_forward(params: ParamSet, x: np.ndarray, y: np.ndarray):
    """Discriminator pass: latents (B, N, E) + labels (B,) -> probabilities (B,)."""
    u, proj_cache = dense_forward(params["disc.proj.w"], params["disc.proj.b"], x, "linear")
    v = label_vectors(params["disc.emb"], y)
    e = u * v[:, None, :]
    hs, lstm_cache = lstm_forward(params["disc.lstm.wx"], params["disc.lstm.wh"],
                                  params["disc.lstm.b"], e)
    h_last = hs[:, -1, :]
    logit, head_cache = dense_forward(params["disc.head.w"], params["disc.head.b"],
                                      h_last, "linear")
    p = sigmoid(logit[:, 0])
    cache = {"u": u, "v": v, "y": y, "proj": proj_cache, "lstm": lstm_cache,
             "head": head_cache, "hs_shape": hs.shape}
    return p, cache


def _disc_backward(params: ParamSet, cache: dict, dlogit: np.ndarray,
                   need_dx: bool = False):
    """Gradients of the discriminator given d(loss)/d(logit) of shape (B,).

    Returns (grads, dx) with dx = d(loss)/d(input latents) when requested.
    """
    grads = ParamSet()
    dw, db, dh_last = dense_backward(params["disc.head.w"], cache["head"],
                                     dlogit[:, None])
    dh_out = np.zeros(cache["hs_shape"])
    dh_out[:, -1, :] = dh_last
    dwx, dwh, dbl, de = lstm_backward(params["disc.lstm.wx"], params["disc.lstm.wh"],
                                      cache["lstm"], dh_out)
    du = de * cache["v"][:, None, :]
    dv = (de * cache["u"]).sum(axis=1)
    y = np.asarray(cache["y"], dtype=np.float64).reshape(-1)
    demb = np.zeros_like(params["disc.emb"])
    demb[0] = ((1.0 - y)[:, None] * dv).sum(axis=0)
    demb[1] = (y[:, None] * dv).sum(axis=0)
    dpw, dpb, dx = dense_backward(params["disc.proj.w"], cache["proj"], du)
    grads.add("disc.emb", demb)
    grads.add("disc.proj.w", dpw)
    grads.add("disc.proj.b", dpb)
    grads.add("disc.lstm.wx", dwx)
    grads.add("disc.lstm.wh", dwh)
    grads.add("disc.lstm.b", dbl)
    grads.add("disc.head.w", dw)
    grads.add("disc.head.b", db)
    return grads, (dx if need_dx else None)


# ---------------------------------------------------------------------------
# public single-sample operations
# ---------------------------------------------------------------------------

def generator_forward(model: GanModel, z: np.ndarray, y) -> np.ndarray:
    """Latent sequence (N, E) generated from one noise sequence (N, Z)."""
    z = np.asarray(z, dtype=np.float64)
    expected = (model.config.n_steps, model.config.noise_dim)
    if z.shape != expected:
        raise ShapeError(f"generator expects noise shape {expected}, got {z.shape}")
    out, _ = _gen_forward(model.params, z[None, :, :], np.asarray([float(y)]))
    return out[0]


def discriminator_forward(model: GanModel, x: np.ndarray, y) -> float:
    """Probability that the latent sequence x (N, E) is real, given label y."""
    x = np.asarray(x, dtype=np.float64)
    expected = (model.config.n_steps, model.config.latent_dim)
    if x.shape != expected:
        raise ShapeError(f"discriminator expects latent shape {expected}, got {x.shape}")
    p, _ = _disc_forward(model.params, x[None, :, :], np.asarray([float(y)]))
    return float(p[0])


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _pair_indices(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """For each element, a uniformly drawn same-class index within the batch."""
    idx = np.empty(labels.size, dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        idx[members] = members[rng.integers(0, members.size, size=members.size)]
    return idx


def _l2_term(fake: np.ndarray, paired: np.ndarray):
    """Mean flattened-L2 distance per sample plus its gradient w.r.t. fake."""
    diff = fake - paired
    norms = np.sqrt((diff * diff).sum(axis=(1, 2)))
    term = float(norms.mean())
    safe = np.where(norms > 1e-12, norms, 1.0)
    dfake = diff / safe[:, None, None] / fake.shape[0]
    dfake[norms <= 1e-12] = 0.0
    return term, norms, dfake


def gan_losses(model: GanModel, real_latents_by_class: dict, z: np.ndarray,
               y: np.ndarray, rng: np.random.Generator) -> dict:
    """Evaluate d_loss, g_loss and the (unweighted) l2_term on one batch.

    real_latents_by_class maps class code -> array (M, N, E) of encodings of
    real profiles. For each requested label a real sample and an independent
    same-class L2 pairing are drawn from that pool.
    """
    y = np.asarray(y)
    z = np.asarray(z, dtype=np.float64)
    for cls in np.unique(y):
        pool = real_latents_by_class.get(int(cls))
        if pool is None or len(pool) == 0:
            raise BatchError(f"no real latents available for class {int(cls)}")

    real = np.stack([
        real_latents_by_class[int(cls)][rng.integers(0, len(real_latents_by_class[int(cls)]))]
        for cls in y
    ])
    paired = np.stack([
        real_latents_by_class[int(cls)][rng.integers(0, len(real_latents_by_class[int(cls)]))]
        for cls in y
    ])

    fake, _ = _gen_forward(model.params, z, y.astype(np.float64))
    p_real, _ = _disc_forward(model.params, real, y.astype(np.float64))
    p_fake, _ = _disc_forward(model.params, fake, y.astype(np.float64))

    d_loss = float(np.mean(bce(p_real, 1.0)) + np.mean(bce(p_fake, 0.0)))
    l2, _, _ = _l2_term(fake, paired)
    g_loss = float(np.mean(bce(p_fake, 1.0)) + model.config.lambda_l2 * l2)
    return {"d_loss": d_loss, "g_loss": g_loss, "l2_term": l2}


def disc_loss_and_grads(params: ParamSet, real: np.ndarray, fake: np.ndarray,
                        y: np.ndarray):
    """Discriminator objective on a batch; grads cover disc.* parameters only."""
    yf = np.asarray(y, dtype=np.float64)
    p_real, cache_r = _disc_forward(params, real, yf)
    p_fake, cache_f = _disc_forward(params, fake, yf)
    loss = float(np.mean(bce(p_real, 1.0)) + np.mean(bce(p_fake, 0.0)))

    grads_r, _ = _disc_backward(params, cache_r, bce_dlogit(p_real, 1.0) / p_real.size)
    grads_f, _ = _disc_backward(params, cache_f, bce_dlogit(p_fake, 0.0) / p_fake.size)
    grads = ParamSet()
    for name in grads_r.names():
        grads.add(name, grads_r[name] + grads_f[name])
    return loss, grads


def gen_loss_and_grads(params: ParamSet, config: GanConfig, z: np.ndarray,
                       y: np.ndarray, paired: np.ndarray):
    """Generator objective (adversarial + lambda * L2) on a batch.

    Gradients cover gen.* parameters only; discriminator parameters are
    treated as constants. Also returns the unweighted l2 term.
    """
    yf = np.asarray(y, dtype=np.float64)
    fake, gen_cache = _gen_forward(params, z, yf)
    p_fake, disc_cache = _disc_forward(params, fake, yf)
    l2, _, dfake_l2 = _l2_term(fake, paired)
    loss = float(np.mean(bce(p_fake, 1.0)) + config.lambda_l2 * l2)

    _, dfake_adv = _disc_backward(params, disc_cache,
                                  bce_dlogit(p_fake, 1.0) / p_fake.size, need_dx=True)
    dfake = dfake_adv + config.lambda_l2 * dfake_l2
    grads = _gen_backward(params, gen_cache, dfake)
    return loss, grads, l2


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GanTrainConfig:
    epochs: int = 500
    batch_size: int = 32
    adam: AdamHyper = AdamHyper()


def train_gan(corpus: ProfileCorpus, ae_model: AutoencoderModel,
              cfg: GanTrainConfig | None = None, seed: int = 0,
              model_config: GanConfig | None = None):
    """Adversarial training in the frozen autoencoder's latent space.

    One discriminator step then one generator step per batch. Returns
    (model, history) with per-epoch d_loss/g_loss/l2_term means.
    """
    cfg = cfg or GanTrainConfig()
    model_config = model_config or GanConfig(
        n_steps=ae_model.config.n_steps, latent_dim=ae_model.config.latent_dim)
    if model_config.latent_dim != ae_model.config.latent_dim:
        raise ConfigError(
            f"gan latent width {model_config.latent_dim} != autoencoder "
            f"latent width {ae_model.config.latent_dim}")
    if model_config.n_steps != ae_model.config.n_steps:
        raise ConfigError(
            f"gan sequence length {model_config.n_steps} != autoencoder "
            f"length {ae_model.config.n_steps}")
    if len(corpus.profiles) == 0:
        raise ValueError("corpus is empty")
    if cfg.epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {cfg.epochs}")

    x_all, labels_all, train_idx, _ = corpus_matrix(corpus, model_config.n_steps)
    labels = labels_all[train_idx]
    if np.any(labels < 0):
        raise ValueError("GAN training requires labelled profiles")
    if np.unique(labels).size < 2:
        raise ValueError("GAN training requires both carefulness classes")

    real_latents = encode_batch(ae_model, x_all[train_idx])

    model = init_gan(model_config, rng_for(seed, "gan-init"))
    train_rng = rng_for(seed, "gan-train")
    disc_state = AdamState.zeros(model.params.subset("disc."))
    gen_state = AdamState.zeros(model.params.subset("gen."))

    n_train = real_latents.shape[0]
    N, Z = model_config.n_steps, model_config.noise_dim
    history = []

    for epoch in range(1, cfg.epochs + 1):
        order = train_rng.permutation(n_train)
        sums = {"d_loss": 0.0, "g_loss": 0.0, "l2_term": 0.0}
        n_seen = 0
        for start in range(0, n_train, cfg.batch_size):
            take = order[start:start + cfg.batch_size]
            real = real_latents[take]
            y = labels[take]
            b = real.shape[0]

            # discriminator step (generator output treated as constant)
            z = train_rng.standard_normal((b, N, Z))
            fake, _ = _gen_forward(model.params, z, y.astype(np.float64))
            d_loss, d_grads = disc_loss_and_grads(model.params, real, fake, y)
            new_disc, disc_state = adam_step(model.params.subset("disc."),
                                             d_grads, disc_state, cfg.adam)
            for name, arr in new_disc.items():
                model.params[name] = arr

            # generator step (discriminator frozen)
            z = train_rng.standard_normal((b, N, Z))
            paired = real[_pair_indices(y, train_rng)]
            g_loss, g_grads, l2 = gen_loss_and_grads(model.params, model_config,
                                                     z, y, paired)
            new_gen, gen_state = adam_step(model.params.subset("gen."),
                                           g_grads, gen_state, cfg.adam)
            for name, arr in new_gen.items():
                model.params[name] = arr

            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise NumericalError(f"GAN loss became non-finite at epoch {epoch}")
            sums["d_loss"] += d_loss * b
            sums["g_loss"] += g_loss * b
            sums["l2_term"] += l2 * b
            n_seen += b

        history.append({"epoch": epoch,
                        "d_loss": sums["d_loss"] / n_seen,
                        "g_loss": sums["g_loss"] / n_seen,
                        "l2_term": sums["l2_term"] / n_seen})
    return model, history


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

def synthesize(gan: GanModel, ae: AutoencoderModel, label: CarefulnessClass,
               n: int, seed: int, stats: NormStats,
               dt: float = DEFAULT_DT) -> list[VelocityProfile]:
    """Draw n new profiles of the requested class.

    Noise -> condition -> generate latents -> frozen decoder -> denormalize.
    The autoencoder is never mutated. Generated profiles carry the
    conditioning label; dt is metadata only (the GAN does not model duration).
    """
    if gan.config.latent_dim != ae.config.latent_dim:
        raise ConfigError(f"generator latent width {gan.config.latent_dim} != "
                          f"autoencoder latent width {ae.config.latent_dim}")
    if gan.config.n_steps != ae.config.n_steps:
        raise ConfigError(f"generator length {gan.config.n_steps} != "
                          f"autoencoder length {ae.config.n_steps}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    label = CarefulnessClass(label)
    rng = rng_for(seed, "synthesize")
    z = rng.standard_normal((n, gan.config.n_steps, gan.config.noise_dim))
    y = np.full(n, float(int(label)))
    latents, _ = _gen_forward(gan.params, z, y)
    decoded = decode_batch(ae, latents)[:, :, 0]
    out = []
    for row in decoded:
        profile = denormalize(VelocityProfile(row, dt, label), stats)
        out.append(profile)
    return out


def write_training_log(history, path) -> None:
    """CSV log, one row per epoch: epoch,d_loss,g_loss,l2_term."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,d_loss,g_loss,l2_term\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['d_loss']!r},{row['g_loss']!r},{row['l2_term']!r}\n")
