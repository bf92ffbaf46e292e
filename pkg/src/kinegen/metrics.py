"""Fidelity and comparison metrics: PCA, nearest neighbors, Pearson, class stats.

Used both for judging synthetic profiles against the real corpus and for
scoring planned-vs-executed velocity traces.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UndefinedCorrelationError
from .profiles import (CarefulnessClass, ProfileCorpus, VelocityProfile,
                       normalize, resample)

NN_QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


# ---------------------------------------------------------------------------
# PCA by power iteration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Pca2D:
    """Mean, top-2 orthonormal directions, and their explained variances."""
    mean: np.ndarray
    directions: np.ndarray      # (2, D)
    explained: np.ndarray       # (2,), sorted descending


def _power_iteration(cov: np.ndarray, start: np.ndarray,
                     max_iter: int = 1000, tol: float = 1e-10):
    v = start / np.linalg.norm(start)
    for _ in range(max_iter):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return v, 0.0  # start lies in the null space
        w = w / norm
        if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
            v = w
            break
        v = w
    return v, float(v @ cov @ v)


def _dominant_direction(cov: np.ndarray) -> tuple[np.ndarray, float]:
    dim = cov.shape[0]
    start = np.zeros(dim)
    start[0] = 1.0
    best_v, best_lam = _power_iteration(cov, start)
    # the deterministic start can be (near) orthogonal to the top eigenvector;
    # a second fixed start breaks that tie
    alt = np.ones(dim)
    v2, lam2 = _power_iteration(cov, alt)
    if lam2 > best_lam * (1.0 + 1e-9):
        best_v, best_lam = v2, lam2
    return best_v, best_lam


def pca_fit(data) -> Pca2D:
    """Top-2 principal directions of the sample covariance (power iteration).

    Needs at least 3 vectors of dimension >= 2.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ValueError(f"pca_fit needs >= 3 vectors, got shape {x.shape}")
    if x.shape[1] < 2:
        raise ValueError(f"pca_fit needs dimension >= 2, got {x.shape[1]}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)

    v1, lam1 = _dominant_direction(cov)
    deflated = cov - lam1 * np.outer(v1, v1)
    v2, _ = _dominant_direction(deflated)
    v2 = v2 - (v2 @ v1) * v1  # keep strictly orthonormal despite round-off
    norm = np.linalg.norm(v2)
    if norm < 1e-12:
        # rank-1 data: any unit vector orthogonal to v1 completes the basis
        basis = np.eye(cov.shape[0])
        residual = basis - np.outer(basis @ v1, v1)
        v2 = residual[np.argmax(np.linalg.norm(residual, axis=1))]
        v2 = v2 / np.linalg.norm(v2)
    else:
        v2 = v2 / norm
    lam1 = max(float(v1 @ cov @ v1), 0.0)
    lam2 = max(float(v2 @ cov @ v2), 0.0)

    directions = np.stack([v1, v2])
    explained = np.array([lam1, lam2])
    if explained[1] > explained[0]:
        directions = directions[::-1].copy()
        explained = explained[::-1].copy()
    return Pca2D(mean, directions, explained)


def pca_project(pca: Pca2D, vector) -> np.ndarray:
    """2D coordinates of a vector in the fitted principal plane."""
    vec = np.asarray(vector, dtype=np.float64)
    return pca.directions @ (vec - pca.mean)


# ---------------------------------------------------------------------------
# nearest neighbors
# ---------------------------------------------------------------------------

def nearest_neighbor_distances(synth, real) -> np.ndarray:
    """For each synthetic sample, the L2 distance to its closest real sample."""
    a = np.asarray(synth, dtype=np.float64)
    b = np.asarray(real, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"sample lengths differ: {a.shape} vs {b.shape}")
    # ||a-b||^2 = |a|^2 - 2ab + |b|^2, clipped against round-off
    sq = (a * a).sum(1)[:, None] - 2.0 * a @ b.T + (b * b).sum(1)[None, :]
    np.clip(sq, 0.0, None, out=sq)
    return np.sqrt(sq.min(axis=1))


# ---------------------------------------------------------------------------
# Pearson correlation
# ---------------------------------------------------------------------------

def pearson(a, b) -> float:
    """Pearson correlation coefficient; raises on constant inputs."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError(f"pearson needs two equal-length series of >= 2, "
                         f"got {x.shape} and {y.shape}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    r = float((xc * yc).sum() / (sx * sy))
    return min(1.0, max(-1.0, r))


def pearson_on_common_base(a_times, a_values, b_times, b_values) -> float:
    """Pearson after resampling signal a onto signal b's time base."""
    a_interp = np.interp(b_times, a_times, a_values)
    return pearson(a_interp, np.asarray(b_values, dtype=np.float64))


# ---------------------------------------------------------------------------
# per-class summary statistics
# ---------------------------------------------------------------------------

def profile_features(profile: VelocityProfile) -> tuple[float, float]:
    """(peak speed, duration-weighted mean speed) of one profile."""
    return profile.peak, profile.integral() / profile.duration


def class_stats(profiles) -> dict:
    """Per-class mean/median/sd of peak speed and duration.

    Profiles without a label are grouped under None.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("class_stats needs at least one profile")
    groups: dict = {}
    for p in profiles:
        groups.setdefault(p.label, []).append(p)
    out = {}
    for label, members in groups.items():
        peaks = np.array([m.peak for m in members])
        durations = np.array([m.duration for m in members])
        out[label] = {
            "count": len(members),
            "peak": {"mean": float(peaks.mean()), "median": float(np.median(peaks)),
                     "sd": float(peaks.std())},
            "duration": {"mean": float(durations.mean()),
                         "median": float(np.median(durations)),
                         "sd": float(durations.std())},
        }
    return out


# ---------------------------------------------------------------------------
# label consistency
# ---------------------------------------------------------------------------

def _logistic_fit(features: np.ndarray, targets: np.ndarray,
                  lr: float = 0.5, iters: int = 1000):
    """Deterministic full-batch gradient descent on standardized features."""
    mean = features.mean(axis=0)
    sd = features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    fs = (features - mean) / sd
    w = np.zeros(fs.shape[1])
    b = 0.0
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(fs @ w + b)))
        err = p - targets
        w -= lr * (fs.T @ err) / fs.shape[0]
        b -= lr * err.mean()
    return w, b, mean, sd


def label_consistency(real_profiles, synth_profiles) -> float:
    """Fraction of synthetic profiles classified as their conditioning label.

    A two-feature logistic classifier (peak speed, duration-weighted mean
    speed) is fitted on the labelled real profiles by gradient descent, then
    applied to the synthetic batch.
    """
    real = [p for p in real_profiles if p.label is not None]
    synth = [p for p in synth_profiles if p.label is not None]
    if len({p.label for p in real}) < 2:
        raise ValueError("real profiles must contain both classes")
    if not synth:
        raise ValueError("no labelled synthetic profiles given")
    if len({p.label for p in synth}) < 2:
        raise ValueError("synthetic profiles must contain both classes")

    feats = np.array([profile_features(p) for p in real])
    targets = np.array([float(int(p.label)) for p in real])
    w, b, mean, sd = _logistic_fit(feats, targets)

    sf = (np.array([profile_features(p) for p in synth]) - mean) / sd
    predicted = (sf @ w + b) > 0.0
    wanted = np.array([int(p.label) == 1 for p in synth])
    return float(np.mean(predicted == wanted))


# ---------------------------------------------------------------------------
# fidelity report
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class FidelityReport:
    """Synthetic-vs-real summary: class stats, NN distances, accuracy, PCA."""
    real_stats: dict
    synth_stats: dict
    nn_quantiles: dict
    label_accuracy: float
    pca: Pca2D
    pca_points: list          # rows: {x, y, source, label}
    nn_distances: np.ndarray


def _as_matrix(profiles, n_steps: int, stats) -> np.ndarray:
    rows = [normalize(resample(p, n_steps), stats).samples for p in profiles]
    return np.asarray(rows)


def build_fidelity_report(real_corpus: ProfileCorpus, synth_profiles,
                          n_steps: int | None = None) -> FidelityReport:
    """Compare a synthetic batch against the real corpus.

    PCA and nearest-neighbor distances operate on length-N normalized
    profiles (real profiles are resampled; both sides share the corpus'
    normalization stats). The PCA plane is fitted on the real data and both
    sets are projected into it.
    """
    synth = list(synth_profiles)
    if not synth or not real_corpus.profiles:
        raise ValueError("both corpora must be nonempty")
    lengths = {p.samples.size for p in synth}
    if n_steps is None:
        if len(lengths) != 1:
            raise ValueError(f"synthetic profiles have mixed lengths {sorted(lengths)}")
        n_steps = lengths.pop()

    stats = real_corpus.normalization
    real_matrix = _as_matrix(real_corpus.profiles, n_steps, stats)
    synth_matrix = _as_matrix(synth, n_steps, stats)

    pca = pca_fit(real_matrix)
    points = []
    for row, profile in zip(real_matrix, real_corpus.profiles):
        xy = pca_project(pca, row)
        label = "" if profile.label is None else int(profile.label)
        points.append({"x": float(xy[0]), "y": float(xy[1]), "source": "real",
                       "label": label})
    for row, profile in zip(synth_matrix, synth):
        xy = pca_project(pca, row)
        label = "" if profile.label is None else int(profile.label)
        points.append({"x": float(xy[0]), "y": float(xy[1]), "source": "synth",
                       "label": label})

    nn = nearest_neighbor_distances(synth_matrix, real_matrix)
    quantiles = {f"q{int(q * 100):02d}": float(np.quantile(nn, q)) for q in NN_QUANTILES}
    accuracy = label_consistency(real_corpus.profiles, synth)

    return FidelityReport(
        real_stats=class_stats(real_corpus.profiles),
        synth_stats=class_stats(synth),
        nn_quantiles=quantiles,
        label_accuracy=accuracy,
        pca=pca,
        pca_points=points,
        nn_distances=nn,
    )


def _stats_rows(stats: dict, source: str):
    for label, entry in sorted(stats.items(), key=lambda kv: (kv[0] is None, kv[0])):
        yield {
            "source": source,
            "label": "" if label is None else int(label),
            "count": entry["count"],
            "peak_mean": entry["peak"]["mean"],
            "peak_median": entry["peak"]["median"],
            "peak_sd": entry["peak"]["sd"],
            "duration_mean": entry["duration"]["mean"],
            "duration_median": entry["duration"]["median"],
            "duration_sd": entry["duration"]["sd"],
        }


def write_fidelity_report(report: FidelityReport, outdir) -> None:
    """Emit report.json plus pca_points.csv, nn_distances.csv, class_stats.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    def _stats_json(stats):
        return {str(int(k)) if k is not None else "unlabelled": v
                for k, v in stats.items()}

    payload = {
        "label_accuracy": report.label_accuracy,
        "nn_distance_quantiles": report.nn_quantiles,
        "real_class_stats": _stats_json(report.real_stats),
        "synth_class_stats": _stats_json(report.synth_stats),
        "pca": {
            "explained_variance": [float(v) for v in report.pca.explained],
            "direction_norms": [float(np.linalg.norm(d)) for d in report.pca.directions],
        },
    }
    (outdir / "report.json").write_text(json.dumps(payload, indent=1), encoding="utf-8")

    with open(outdir / "pca_points.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "source", "label"])
        for pt in report.pca_points:
            writer.writerow([repr(pt["x"]), repr(pt["y"]), pt["source"], pt["label"]])

    with open(outdir / "nn_distances.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["synth_index", "nn_distance"])
        for idx, dist in enumerate(report.nn_distances):
            writer.writerow([idx, repr(float(dist))])

    with open(outdir / "class_stats.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["source", "label", "count", "peak_mean", "peak_median", "peak_sd",
                  "duration_mean", "duration_median", "duration_sd"]
        writer.writerow(header)
        for row in list(_stats_rows(report.real_stats, "real")) + \
                list(_stats_rows(report.synth_stats, "synth")):
            writer.writerow([row["source"], row["label"], row["count"],
                             repr(row["peak_mean"]), repr(row["peak_median"]),
                             repr(row["peak_sd"]), repr(row["duration_mean"]),
                             repr(row["duration_median"]), repr(row["duration_sd"])])
