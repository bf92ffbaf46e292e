"""Velocity-profile corpus: synthesis, resampling, normalization, CSV I/O.

The corpus is a synthetic surrogate for a motion-capture recording of
object-transport movements: each profile is the tangential speed of the hand
during one transport, sampled at 22 Hz, labelled Careful or NotCareful.
Careful transports are slower and longer; the base curve is the minimum-jerk
speed bell with a little smoothed noise on top.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .rng import rng_for

DEFAULT_DT = 1.0 / 22.0  # 22 Hz sampling

# Max of the unit minimum-jerk speed quartic 30 t^2 - 60 t^3 + 30 t^4 (at t=0.5)
MIN_JERK_PEAK = 1.875


class CarefulnessClass(IntEnum):
    """Binary carefulness attribute of a transport movement."""
    NOT_CAREFUL = 0
    CAREFUL = 1


def min_jerk_speed(tau, amplitude: float = 1.0):
    """Minimum-jerk speed curve A*(30 tau^2 - 60 tau^3 + 30 tau^4), tau in [0, 1]."""
    tau = np.asarray(tau, dtype=np.float64)
    out = amplitude * (30.0 * tau**2 - 60.0 * tau**3 + 30.0 * tau**4)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class VelocityProfile:
    """Uniformly sampled non-negative tangential speed series."""
    samples: np.ndarray
    dt: float
    label: CarefulnessClass | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("profile needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("profile samples must be finite")
        if np.any(self.samples < 0.0):
            raise ValueError("profile samples must be >= 0")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.label is not None:
            self.label = CarefulnessClass(self.label)

    @property
    def duration(self) -> float:
        return (self.samples.size - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    @property
    def peak(self) -> float:
        return float(self.samples.max())

    def integral(self) -> float:
        """Trapezoidal integral of speed over time (= distance covered)."""
        return float(self.dt * 0.5 * (self.samples[:-1] + self.samples[1:]).sum())


@dataclass(frozen=True)
class NormStats:
    """Min-max speed statistics from the training split."""
    min: float
    max: float

    def __post_init__(self):
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise ConfigError("normalization stats must be finite")
        if not self.max > self.min:
            raise ConfigError(f"normalization needs max > min, got [{self.min}, {self.max}]")


@dataclass(frozen=True)
class ClassSynthParams:
    """Per-class sampling ranges for the surrogate generator."""
    duration_range: tuple[float, float]
    peak_range: tuple[float, float]

    def validate(self, name: str) -> None:
        lo_d, hi_d = self.duration_range
        lo_p, hi_p = self.peak_range
        if not (0.0 < lo_d <= hi_d):
            raise ConfigError(f"{name}: duration range must be positive and ordered")
        if not (0.0 < lo_p <= hi_p):
            raise ConfigError(f"{name}: peak range must be positive and ordered")


@dataclass(frozen=True)
class SynthConfig:
    """Surrogate-corpus generator settings.

    The class parameters are stand-ins chosen so NotCareful transports are
    fast (peaks up to the 1 m/s range) and Careful ones slow and long; the
    configured peak ranges are disjoint on purpose.
    """
    dt: float = DEFAULT_DT
    n_not_careful: int = 499
    n_careful: int = 502
    not_careful: ClassSynthParams = field(
        default_factory=lambda: ClassSynthParams((1.1, 1.5), (0.6, 1.0)))
    careful: ClassSynthParams = field(
        default_factory=lambda: ClassSynthParams((1.6, 2.6), (0.15, 0.40)))
    noise_sd_frac: float = 0.02   # noise sd as fraction of the profile peak
    noise_window: int = 5         # moving-average smoothing width (samples)
    heldout_frac: float = 0.1

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.n_not_careful < 1 or self.n_careful < 1:
            raise ConfigError("per-class profile counts must be >= 1")
        self.not_careful.validate("not_careful")
        self.careful.validate("careful")
        if self.noise_sd_frac < 0:
            raise ConfigError("noise_sd_frac must be >= 0")
        if self.noise_window < 1:
            raise ConfigError("noise_window must be >= 1")
        if not 0.0 <= self.heldout_frac < 1.0:
            raise ConfigError("heldout_frac must be in [0, 1)")

    def params_for(self, label: CarefulnessClass) -> ClassSynthParams:
        return self.careful if label == CarefulnessClass.CAREFUL else self.not_careful

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class ProfileCorpus:
    """Profiles plus the train/held-out split and training-split norm stats."""
    profiles: list[VelocityProfile]
    normalization: NormStats
    train_indices: list[int]
    heldout_indices: list[int]

    def __post_init__(self):
        train = set(self.train_indices)
        held = set(self.heldout_indices)
        if train & held:
            raise ValueError("train and held-out splits overlap")
        if train | held != set(range(len(self.profiles))):
            raise ValueError("split does not cover all profile indices")

    def __len__(self) -> int:
        return len(self.profiles)

    def train_profiles(self) -> list[VelocityProfile]:
        return [self.profiles[i] for i in self.train_indices]

    def heldout_profiles(self) -> list[VelocityProfile]:
        return [self.profiles[i] for i in self.heldout_indices]

    def by_class(self, label: CarefulnessClass) -> list[VelocityProfile]:
        return [p for p in self.profiles if p.label == label]


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

def synth_profile(label: CarefulnessClass, seed, cfg: SynthConfig | None = None) -> VelocityProfile:
    """One surrogate profile: a minimum-jerk bell with smoothed additive noise.

    Draw order (duration, peak, noise) is fixed so a given (seed, cfg) is
    bitwise reproducible. Endpoints are forced to zero and samples clamped
    at zero.
    """
    cfg = cfg or SynthConfig()
    cfg.validate()
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(int(seed))
    params = cfg.params_for(CarefulnessClass(label))

    duration = rng.uniform(*params.duration_range)
    peak_speed = rng.uniform(*params.peak_range)
    amplitude = peak_speed / MIN_JERK_PEAK

    n = max(2, int(round(duration / cfg.dt)) + 1)
    tau = np.linspace(0.0, 1.0, n)
    samples = min_jerk_speed(tau, amplitude)

    if cfg.noise_sd_frac > 0:
        noise = rng.normal(0.0, cfg.noise_sd_frac * peak_speed, size=n)
        window = min(cfg.noise_window, n)
        kernel = np.ones(window) / window
        samples = samples + np.convolve(noise, kernel, mode="same")

    samples[0] = 0.0
    samples[-1] = 0.0
    np.clip(samples, 0.0, None, out=samples)
    return VelocityProfile(samples, cfg.dt, CarefulnessClass(label))


def make_dataset(cfg: SynthConfig | None = None, seed: int = 0) -> ProfileCorpus:
    """Full surrogate corpus with split and training-split norm stats.

    Each profile gets its own sub-stream derived from (seed, index), so the
    corpus is identical regardless of generation order or parallelism.
    """
    cfg = cfg or SynthConfig()
    cfg.validate()

    labels = ([CarefulnessClass.NOT_CAREFUL] * cfg.n_not_careful
              + [CarefulnessClass.CAREFUL] * cfg.n_careful)
    profiles = [
        synth_profile(lab, rng_for(seed, "profile", idx), cfg)
        for idx, lab in enumerate(labels)
    ]

    total = len(profiles)
    order = rng_for(seed, "split").permutation(total)
    n_held = min(int(round(cfg.heldout_frac * total)), total - 1)
    heldout = sorted(int(i) for i in order[:n_held])
    train = sorted(int(i) for i in order[n_held:])

    train_samples = np.concatenate([profiles[i].samples for i in train])
    stats = NormStats(float(train_samples.min()), float(train_samples.max()))
    return ProfileCorpus(profiles, stats, train, heldout)


# ---------------------------------------------------------------------------
# resampling and normalization
# ---------------------------------------------------------------------------

def resample(profile: VelocityProfile, n: int) -> VelocityProfile:
    """Linear interpolation onto n uniform samples over the same duration."""
    if n < 2:
        raise ValueError(f"resample needs n >= 2, got {n}")
    if n == profile.samples.size:
        return VelocityProfile(profile.samples.copy(), profile.dt, profile.label)
    duration = profile.duration
    new_times = np.linspace(0.0, duration, n)
    new_samples = np.interp(new_times, profile.times, profile.samples)
    return VelocityProfile(new_samples, duration / (n - 1), profile.label)


def normalize(profile: VelocityProfile, stats: NormStats) -> VelocityProfile:
    """Min-max map onto [0, 1] (w.r.t. the given stats)."""
    scaled = (profile.samples - stats.min) / (stats.max - stats.min)
    return VelocityProfile(scaled, profile.dt, profile.label)


def denormalize(profile: VelocityProfile, stats: NormStats) -> VelocityProfile:
    """Inverse of normalize."""
    restored = profile.samples * (stats.max - stats.min) + stats.min
    return VelocityProfile(restored, profile.dt, profile.label)


# ---------------------------------------------------------------------------
# corpus I/O
# ---------------------------------------------------------------------------

CORPUS_HEADER = ["profile_id", "label", "dt", "sample_index", "speed_mps"]


def manifest_path(corpus_path) -> Path:
    return Path(corpus_path).with_suffix(".manifest.json")


def save_corpus(corpus: ProfileCorpus, path, *, seed: int | None = None,
                config: dict | None = None) -> None:
    """Write the corpus CSV plus a sidecar manifest JSON.

    CSV columns: profile_id,label,dt,sample_index,speed_mps (UTF-8, LF).
    The manifest carries counts, the split, normalization stats, and an echo
    of the generator seed/config when provided.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CORPUS_HEADER)
        for pid, profile in enumerate(corpus.profiles):
            label = "" if profile.label is None else int(profile.label)
            for k, speed in enumerate(profile.samples):
                writer.writerow([pid, label, repr(profile.dt), k, repr(float(speed))])

    counts = {
        "not_careful": sum(1 for p in corpus.profiles if p.label == CarefulnessClass.NOT_CAREFUL),
        "careful": sum(1 for p in corpus.profiles if p.label == CarefulnessClass.CAREFUL),
    }
    manifest = {
        "n_profiles": len(corpus.profiles),
        "counts": counts,
        "seed": seed,
        "config": config,
        "normalization": {"min": corpus.normalization.min, "max": corpus.normalization.max},
        "split": {"train": list(corpus.train_indices), "heldout": list(corpus.heldout_indices)},
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def load_corpus(path) -> ProfileCorpus:
    """Read a corpus CSV (and its manifest, when present).

    Without a manifest every profile lands in the training split and the
    normalization stats are recomputed from all samples.
    """
    path = Path(path)
    rows_by_profile: dict[int, dict] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty corpus file")
        if header != CORPUS_HEADER:
            raise ParseError(f"{path}: unexpected header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CORPUS_HEADER):
                raise ParseError(f"{path}: line {lineno}: expected "
                                 f"{len(CORPUS_HEADER)} fields, got {len(row)}")
            try:
                pid = int(row[0])
                label = None if row[1] == "" else int(row[1])
                dt = float(row[2])
                k = int(row[3])
                speed = float(row[4])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if label is not None and label not in (0, 1):
                raise ParseError(f"{path}: line {lineno}: label must be 0 or 1, got {label}")
            if not np.isfinite(speed) or speed < 0.0:
                raise ParseError(
                    f"{path}: line {lineno}: profile {pid} sample {k}: "
                    f"speed_mps must be finite and >= 0, got {speed}")
            entry = rows_by_profile.setdefault(pid, {"dt": dt, "label": label, "speeds": {}})
            if entry["dt"] != dt:
                raise ParseError(f"{path}: line {lineno}: profile {pid} has inconsistent dt")
            if entry["label"] != label:
                raise ParseError(f"{path}: line {lineno}: profile {pid} has inconsistent label")
            if k in entry["speeds"]:
                raise ParseError(f"{path}: line {lineno}: profile {pid} repeats sample {k}")
            entry["speeds"][k] = speed

    if not rows_by_profile:
        raise ParseError(f"{path}: corpus file has a header but no records")

    profiles = []
    for pid in sorted(rows_by_profile):
        entry = rows_by_profile[pid]
        indices = sorted(entry["speeds"])
        if indices != list(range(len(indices))):
            raise ParseError(f"{path}: profile {pid}: sample indices not contiguous from 0")
        samples = np.array([entry["speeds"][k] for k in indices])
        try:
            profiles.append(VelocityProfile(samples, entry["dt"], entry["label"]))
        except ValueError as exc:
            raise ParseError(f"{path}: profile {pid}: {exc}") from exc

    mpath = manifest_path(path)
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
            stats = NormStats(float(manifest["normalization"]["min"]),
                              float(manifest["normalization"]["max"]))
            train = [int(i) for i in manifest["split"]["train"]]
            heldout = [int(i) for i in manifest["split"]["heldout"]]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{mpath}: malformed manifest ({exc})") from exc
    else:
        every = np.concatenate([p.samples for p in profiles])
        stats = NormStats(float(every.min()), float(every.max()))
        train = list(range(len(profiles)))
        heldout = []

    try:
        return ProfileCorpus(profiles, stats, train, heldout)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
