"""Acceptance suite: one test per primary criterion, at its stated tolerance.

Each test prints a single PASS/FAIL line. Training-based criteria share one
module-scoped fixture (default corpus, 40 autoencoder epochs, 40 GAN epochs —
inside the <=300 / <=500 budgets) so the suite stays a few minutes long.
"""

import time

import numpy as np
import pytest

from kinegen import autoencoder as ae
from kinegen import cgan
from kinegen.cli import main as cli_main
from kinegen.metrics import label_consistency, nearest_neighbor_distances
from kinegen.neural import ParamSet, bce, dense_backward, dense_forward
from kinegen.profiles import (CarefulnessClass, SynthConfig, make_dataset,
                              normalize, resample, synth_profile)
from kinegen.rng import rng_for
from kinegen.trajectory import (builtin_presets, compare, executed_speed,
                                make_path, rescale_profile, simulate_execution,
                                spatial_waypoints, temporal_waypoints)

MASTER_SEED = 2024


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))


# ---------------------------------------------------------------------------
# shared training fixture
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus():
    return make_dataset(SynthConfig(), seed=MASTER_SEED)


@pytest.fixture(scope="module")
def trained(corpus):
    t0 = time.monotonic()
    ae_model, ae_history = ae.train_autoencoder(
        corpus, ae.TrainConfig(epochs=40), seed=MASTER_SEED + 1)
    ae_seconds = time.monotonic() - t0

    t0 = time.monotonic()
    gan_model, gan_history = cgan.train_gan(
        corpus, ae_model, cgan.GanTrainConfig(epochs=40), seed=MASTER_SEED + 2)
    gan_seconds = time.monotonic() - t0
    return {
        "ae": ae_model, "gan": gan_model,
        "ae_history": ae_history, "gan_history": gan_history,
        "ae_seconds": ae_seconds, "gan_seconds": gan_seconds,
    }


@pytest.fixture(scope="module")
def synth_batches(corpus, trained):
    careful = cgan.synthesize(trained["gan"], trained["ae"],
                              CarefulnessClass.CAREFUL, 100,
                              seed=MASTER_SEED + 3, stats=corpus.normalization)
    not_careful = cgan.synthesize(trained["gan"], trained["ae"],
                                  CarefulnessClass.NOT_CAREFUL, 100,
                                  seed=MASTER_SEED + 4, stats=corpus.normalization)
    return careful, not_careful


def select_profiles(corpus, per_class=3):
    rng = rng_for(MASTER_SEED, "selection")
    chosen = {}
    for label in CarefulnessClass:
        pool = corpus.by_class(label)
        picks = rng.choice(len(pool), size=per_class, replace=False)
        chosen[label] = [pool[int(i)] for i in picks]
    return chosen


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_gradient_integrity():
    """>= 100 random tiny networks, analytic vs central differences < 1e-4."""
    from kinegen.neural import (grad_check, init_dense, init_lstm,
                                lstm_backward, lstm_forward, sigmoid)

    t0 = time.monotonic()
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for trial in range(100):
        hidden = int(rng.integers(1, 9))
        n_steps = int(rng.integers(2, 6))
        in_dim = int(rng.integers(1, 4))
        use_bce = trial % 2 == 0
        params = ParamSet()
        init_lstm(params, "cell", rng, in_dim, hidden)
        init_dense(params, "head", rng, hidden, 1)
        x = rng.standard_normal((2, n_steps, in_dim))
        target = rng.uniform(0.1, 0.9, size=(2, n_steps, 1))

        def loss_fn(p):
            hs, cache = lstm_forward(p["cell.wx"], p["cell.wh"], p["cell.b"], x)
            if use_bce:
                h_last = hs[:, -1, :]
                logit, hcache = dense_forward(p["head.w"], p["head.b"], h_last,
                                              "linear")
                prob = sigmoid(logit[:, 0])
                loss = float(np.mean(bce(prob, 1.0)))
                dlogit = (prob - 1.0) / prob.size
                dw, db, dh_last = dense_backward(p["head.w"], hcache,
                                                 dlogit[:, None])
                dh_out = np.zeros_like(hs)
                dh_out[:, -1, :] = dh_last
            else:
                out, hcache = dense_forward(p["head.w"], p["head.b"], hs, "tanh")
                diff = out - target
                loss = float(np.mean(diff * diff))
                dw, db, dh_out = dense_backward(p["head.w"], hcache,
                                                2.0 * diff / diff.size)
            dwx, dwh, dbl, _ = lstm_backward(p["cell.wx"], p["cell.wh"], cache,
                                             dh_out)
            return loss, ParamSet({"cell.wx": dwx, "cell.wh": dwh, "cell.b": dbl,
                                   "head.w": dw, "head.b": db})

        worst = max(worst, grad_check(loss_fn, params, eps=1e-5))

    elapsed = time.monotonic() - t0
    ok = worst < 1e-4 and elapsed < 60.0
    report("gradient integrity", ok,
           f"max rel err {worst:.2e} over 100 nets, {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 60.0


def test_autoencoder_fidelity(corpus, trained):
    """Held-out reconstruction RMSE < 0.05 after <= 300 epochs, < 10 min."""
    heldout = [normalize(resample(p, trained["ae"].config.n_steps),
                         corpus.normalization)
               for p in corpus.heldout_profiles()]
    rmse = ae.reconstruction_error(trained["ae"], heldout)
    epochs = len(trained["ae_history"])
    ok = rmse < 0.05 and epochs <= 300 and trained["ae_seconds"] < 600.0
    report("autoencoder fidelity", ok,
           f"held-out RMSE {rmse:.4f} after {epochs} epochs, "
           f"{trained['ae_seconds']:.0f}s")
    assert rmse < 0.05
    assert epochs <= 300
    assert trained["ae_seconds"] < 600.0


def test_conditional_fidelity(corpus, trained, synth_batches):
    """label_consistency >= 0.85 on 200 samples; median C peak < NC peak."""
    careful, not_careful = synth_batches
    accuracy = label_consistency(corpus.profiles, careful + not_careful)
    c_peak = float(np.median([p.peak for p in careful]))
    nc_peak = float(np.median([p.peak for p in not_careful]))
    epochs = len(trained["gan_history"])
    ok = (accuracy >= 0.85 and c_peak < nc_peak and epochs <= 500
          and trained["gan_seconds"] < 1200.0)
    report("conditional fidelity", ok,
           f"consistency {accuracy:.3f}, peaks C {c_peak:.3f} < NC {nc_peak:.3f}, "
           f"{epochs} epochs, {trained['gan_seconds']:.0f}s")
    assert accuracy >= 0.85
    assert c_peak < nc_peak
    assert epochs <= 500
    assert trained["gan_seconds"] < 1200.0


def test_non_copying(corpus, trained, synth_batches):
    """< 5% of synthetic samples within the 10th-pct real-real NN distance."""
    n_steps = trained["ae"].config.n_steps
    stats = corpus.normalization
    real = np.array([normalize(resample(p, n_steps), stats).samples
                     for p in corpus.profiles])
    synth = np.array([normalize(resample(p, n_steps), stats).samples
                      for p in synth_batches[0] + synth_batches[1]])

    # real-to-real nearest neighbor with self excluded
    sq = ((real * real).sum(1)[:, None] - 2.0 * real @ real.T
          + (real * real).sum(1)[None, :])
    np.fill_diagonal(sq, np.inf)
    real_nn = np.sqrt(np.clip(sq, 0.0, None).min(axis=1))
    eps = float(np.quantile(real_nn, 0.10))

    synth_nn = nearest_neighbor_distances(synth, real)
    copy_fraction = float((synth_nn < eps).mean())
    duplicates = int((synth_nn == 0.0).sum())
    ok = copy_fraction < 0.05 and duplicates == 0
    report("non-copying", ok,
           f"{copy_fraction * 100:.1f}% within eps {eps:.4f}, "
           f"{duplicates} exact duplicates, min NN {synth_nn.min():.4f}")
    assert copy_fraction < 0.05
    assert duplicates == 0


def test_time_parameterization_against_fine_grid_oracle():
    """50 random profiles vs a 1000x-finer brute-force oracle."""
    from oracles import fine_arcs, fine_inversion_times

    t0 = time.monotonic()
    worst_t, worst_s = 0.0, 0.0
    for seed in range(50):
        label = CarefulnessClass.CAREFUL if seed % 2 else CarefulnessClass.NOT_CAREFUL
        raw = synth_profile(label, seed, SynthConfig())

        planned = rescale_profile(raw, 0.6)
        wp = spatial_waypoints(planned, make_path("frontal", 0.6), ds=0.01)
        oracle_t = fine_inversion_times(planned, wp.arc_lengths[:-1])
        worst_t = max(worst_t, float(np.abs(wp.times[:-1] - oracle_t).max()))

        planned = rescale_profile(raw, 0.3)
        wp = temporal_waypoints(planned, make_path("sagittal", 0.3), dt_step=0.05)
        oracle_s = fine_arcs(planned, wp.times)
        worst_s = max(worst_s, float(np.abs(wp.arc_lengths - oracle_s).max()))

    elapsed = time.monotonic() - t0
    ok = worst_t < 1e-4 and worst_s < 1e-4 and elapsed < 60.0
    report("time parameterization", ok,
           f"worst time err {worst_t:.2e}s, worst arc err {worst_s:.2e}m, "
           f"{elapsed:.1f}s")
    assert worst_t < 1e-4
    assert worst_s < 1e-4
    assert elapsed < 60.0


def test_ideal_execution_limit(corpus):
    """Ideal actuator: r >= 0.999 and peak within 1%, six profiles x 3 planes."""
    preset = builtin_presets()["ideal"]
    chosen = select_profiles(corpus)
    worst_r, worst_ratio_err = 1.0, 0.0
    for label, profiles in chosen.items():
        for profile in profiles:
            for plane in ("frontal", "sagittal", "oblique"):
                path = make_path(plane, preset.path_length_for(plane))
                planned = rescale_profile(profile, path.length)
                wp = temporal_waypoints(planned, path, preset.dt_step)
                trace = simulate_execution(wp, preset.actuator)
                m = compare(planned, executed_speed(trace))
                worst_r = min(worst_r, m.pearson_r)
                worst_ratio_err = max(worst_ratio_err,
                                      abs(m.peak_executed / m.peak_planned - 1.0))
    ok = worst_r >= 0.999 and worst_ratio_err < 0.01
    report("ideal execution limit", ok,
           f"worst r {worst_r:.5f}, worst peak error {worst_ratio_err * 100:.2f}%")
    assert worst_r >= 0.999
    assert worst_ratio_err < 0.01


def test_calibrated_execution_matches_paper_findings(corpus):
    """baxter-like: median r C >= 0.98, NC in [0.90, 0.98], NC attenuated+delayed."""
    t0 = time.monotonic()
    preset = builtin_presets()["baxter-like"]
    chosen = select_profiles(corpus)
    results = {label: {"r": [], "peak_ratio": [], "delay": []}
               for label in CarefulnessClass}
    for label, profiles in chosen.items():
        for p_idx, profile in enumerate(profiles):
            for plane in ("frontal", "sagittal", "oblique"):
                path = make_path(plane, preset.path_length_for(plane))
                planned = rescale_profile(profile, path.length)
                wp = spatial_waypoints(planned, path, preset.ds)
                for rep in range(10):
                    rep_seed = int(rng_for(MASTER_SEED, "exec", int(label),
                                           p_idx, plane, rep).integers(0, 2**62))
                    trace = simulate_execution(wp, preset.actuator,
                                               noise_seed=rep_seed,
                                               noise_sd=preset.noise_sd)
                    m = compare(planned, executed_speed(trace))
                    results[label]["r"].append(m.pearson_r)
                    results[label]["peak_ratio"].append(
                        m.peak_executed / m.peak_planned)
                    results[label]["delay"].append(m.peak_delay)

    c_r = float(np.median(results[CarefulnessClass.CAREFUL]["r"]))
    nc_r = float(np.median(results[CarefulnessClass.NOT_CAREFUL]["r"]))
    nc_ratio = float(np.median(results[CarefulnessClass.NOT_CAREFUL]["peak_ratio"]))
    nc_delay = float(np.median(results[CarefulnessClass.NOT_CAREFUL]["delay"]))
    elapsed = time.monotonic() - t0

    ok = (c_r >= 0.98 and 0.90 <= nc_r <= 0.98 and nc_ratio < 1.0
          and nc_delay > 0.0 and elapsed < 120.0)
    report("calibrated execution", ok,
           f"median r: C {c_r:.4f}, NC {nc_r:.4f}; NC peak ratio {nc_ratio:.3f}, "
           f"NC delay {nc_delay:+.3f}s, {elapsed:.0f}s")
    assert c_r >= 0.98
    assert 0.90 <= nc_r <= 0.98
    assert nc_ratio < 1.0
    assert nc_delay > 0.0
    assert elapsed < 120.0


def test_rescaling_conservation():
    """1000 random profiles: integral within 0.1%, duration bit-identical."""
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for i in range(1000):
        label = CarefulnessClass(int(rng.integers(0, 2)))
        profile = synth_profile(label, int(rng.integers(0, 2**32)), SynthConfig())
        target = float(rng.uniform(0.1, 1.0))
        scaled = rescale_profile(profile, target)
        worst = max(worst, abs(scaled.integral() - target) / target)
        assert scaled.dt == profile.dt
        assert scaled.duration == profile.duration
        assert scaled.samples.size == profile.samples.size
    ok = worst < 1e-3
    report("rescaling conservation", ok, f"worst integral error {worst:.2e}")
    assert worst < 1e-3


def test_full_pipeline_determinism(tmp_path):
    """Two master-seeded pipeline runs produce byte-identical metric CSVs."""
    def run_pipeline(out):
        args = ["--out", str(out), "--seed", "77"]
        assert cli_main(["generate", *args, "--nc", "12", "--c", "12"]) == 0
        assert cli_main(["train", *args, "--epochs", "6", "--gan-epochs", "3"]) == 0
        assert cli_main(["synthesize", *args, "--n", "8"]) == 0
        assert cli_main(["evaluate", *args, "--real", str(out / "corpus.csv"),
                         "--synth", str(out / "synthetic.csv")]) == 0
        assert cli_main(["execute", *args, "--preset", "baxter-like",
                         "--reps", "2", "--per-class", "1"]) == 0

    run_pipeline(tmp_path / "run1")
    run_pipeline(tmp_path / "run2")

    compared = []
    for name in ("metrics.csv", "synthetic.csv", "nn_distances.csv",
                 "pca_points.csv", "class_stats.csv"):
        a = (tmp_path / "run1" / name).read_bytes()
        b = (tmp_path / "run2" / name).read_bytes()
        compared.append((name, a == b))
    ok = all(same for _, same in compared)
    report("pipeline determinism", ok,
           ", ".join(f"{n}: {'=' if s else '!='}" for n, s in compared))
    for name, same in compared:
        assert same, f"{name} differs between identical runs"
