"""Unit tests for path timing and simulated execution."""

import numpy as np
import pytest

from kinegen.errors import DegenerateProfileError
from kinegen.profiles import CarefulnessClass, SynthConfig, VelocityProfile, synth_profile
from kinegen.trajectory import (ActuatorModel, Plane, TimedWaypointList,
                                builtin_presets, compare, cumulative_distance,
                                executed_speed, lag_step, load_presets,
                                make_path, repeat_runs, rescale_profile,
                                save_presets, simulate_execution,
                                spatial_waypoints, temporal_waypoints)


def fine_grid_inversion_times(profile, targets, refinement=1000):
    """Brute-force oracle: integrate on a dt/refinement grid, then bisect."""
    n_fine = (profile.samples.size - 1) * refinement + 1
    t_fine = np.linspace(0.0, profile.duration, n_fine)
    v_fine = np.interp(t_fine, profile.times, profile.samples)
    step = t_fine[1] - t_fine[0]
    s_fine = np.concatenate([[0.0], np.cumsum(step * 0.5 * (v_fine[:-1] + v_fine[1:]))])
    out = []
    for target in targets:
        i = int(np.searchsorted(s_fine, target))
        if i == 0:
            out.append(0.0)
            continue
        i = min(i, s_fine.size - 1)
        s0, s1 = s_fine[i - 1], s_fine[i]
        frac = 0.0 if s1 == s0 else (target - s0) / (s1 - s0)
        out.append(t_fine[i - 1] + frac * step)
    return np.array(out)


def fine_grid_arcs(profile, times, refinement=1000):
    """Brute-force oracle for arc length at given times."""
    n_fine = (profile.samples.size - 1) * refinement + 1
    t_fine = np.linspace(0.0, profile.duration, n_fine)
    v_fine = np.interp(t_fine, profile.times, profile.samples)
    step = t_fine[1] - t_fine[0]
    s_fine = np.concatenate([[0.0], np.cumsum(step * 0.5 * (v_fine[:-1] + v_fine[1:]))])
    return np.interp(times, t_fine, s_fine)


def random_rescaled_profile(seed, length=0.6):
    label = CarefulnessClass.CAREFUL if seed % 2 else CarefulnessClass.NOT_CAREFUL
    return rescale_profile(synth_profile(label, seed, SynthConfig()), length)


# ---------------------------------------------------------------------------
# rescaling & distance
# ---------------------------------------------------------------------------

def test_rescale_doubles_samples():
    profile = VelocityProfile(np.array([0.0, 0.6, 0.6, 0.0]), dt=0.25)
    # trapezoid integral = 0.25 * (0.3 + 0.6 + 0.3) = 0.3
    assert profile.integral() == pytest.approx(0.3)
    doubled = rescale_profile(profile, 0.6)
    assert np.allclose(doubled.samples, profile.samples * 2.0)
    assert doubled.dt == profile.dt
    assert doubled.samples.size == profile.samples.size

    same = rescale_profile(profile, profile.integral())
    assert np.allclose(same.samples, profile.samples)

    with pytest.raises(DegenerateProfileError):
        rescale_profile(VelocityProfile(np.zeros(4), 0.1), 0.5)


def test_rescale_conservation_random():
    for seed in range(50):
        raw = synth_profile(CarefulnessClass.NOT_CAREFUL, seed, SynthConfig())
        target = 0.2 + 0.01 * seed
        scaled = rescale_profile(raw, target)
        assert abs(scaled.integral() - target) <= 1e-3 * target
        assert scaled.dt == raw.dt
        assert scaled.samples.size == raw.samples.size


def test_cumulative_distance_cases():
    const = VelocityProfile(np.ones(11), dt=0.1)
    s = cumulative_distance(const)
    assert s[0] == 0.0
    assert s[-1] == pytest.approx(1.0)

    zero = VelocityProfile(np.zeros(5), dt=0.1)
    assert np.all(cumulative_distance(zero) == 0.0)

    # triangle peaking at 1 m/s over 2 s: area = 0.5 * 2 * 1 = 1
    tri = VelocityProfile(np.array([0.0, 0.5, 1.0, 0.5, 0.0]), dt=0.5)
    assert cumulative_distance(tri)[-1] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

def test_make_path_directions():
    frontal = make_path("frontal", 0.6)
    delta = frontal.end - frontal.start
    assert np.allclose(delta, [0.6, 0.0, 0.0])
    assert frontal.length == pytest.approx(0.6)

    oblique = make_path(Plane.OBLIQUE, 1.0)
    d = oblique.direction
    assert d[0] == pytest.approx(d[1])
    assert np.linalg.norm(d) == pytest.approx(1.0)

    sagittal = make_path("sagittal", 0.26, origin=(0.1, 0.2, 0.3))
    assert np.allclose(sagittal.start, [0.1, 0.2, 0.3])
    assert np.linalg.norm(sagittal.end - sagittal.start) == pytest.approx(0.26)

    with pytest.raises(ValueError):
        make_path("frontal", 0.0)


# ---------------------------------------------------------------------------
# waypoints
# ---------------------------------------------------------------------------

def test_spatial_waypoints_uniform_motion():
    profile = VelocityProfile(np.full(21, 0.1), dt=0.05)  # 0.1 m/s for 1 s
    wp = spatial_waypoints(profile, make_path("frontal", 0.1), ds=0.01)
    assert len(wp) == 11
    assert np.allclose(wp.times, np.arange(11) * 0.1, atol=1e-9)


def test_spatial_waypoints_count_and_monotonicity():
    profile = random_rescaled_profile(7)
    wp = spatial_waypoints(profile, make_path("frontal", 0.6), ds=0.01)
    assert len(wp) == 61  # 60 cm at 1 cm spacing -> 60 intervals
    assert np.all(np.diff(wp.times) > 0.0)
    assert np.all(np.diff(wp.arc_lengths) > 0.0)
    assert wp.times[-1] == pytest.approx(profile.duration)

    with pytest.raises(ValueError):
        spatial_waypoints(profile, make_path("frontal", 0.6), ds=0.0)
    with pytest.raises(ValueError):
        spatial_waypoints(profile, make_path("frontal", 0.6), ds=0.7)


def test_spatial_waypoints_match_fine_grid_oracle():
    # the terminal waypoint is pinned to (duration, path end) by construction,
    # not inverted: at s = L the inversion is ill-conditioned whenever the
    # profile ends in a clamped zero-speed stretch (the arc stays flat at L)
    for seed in range(8):
        profile = random_rescaled_profile(seed)
        wp = spatial_waypoints(profile, make_path("oblique", 0.6), ds=0.01)
        oracle = fine_grid_inversion_times(profile, wp.arc_lengths[:-1])
        assert np.abs(wp.times[:-1] - oracle).max() < 1e-4


def test_temporal_waypoints_uniform_motion():
    profile = VelocityProfile(np.full(21, 0.1), dt=0.05)
    wp = temporal_waypoints(profile, make_path("sagittal", 0.1), dt_step=0.2)
    arcs = wp.arc_lengths
    assert np.allclose(np.diff(arcs), 0.02, atol=1e-9)


def test_temporal_waypoints_endpoint_and_oracle():
    for seed in range(8):
        profile = random_rescaled_profile(seed, length=0.3)
        path = make_path("sagittal", 0.3)
        wp = temporal_waypoints(profile, path, dt_step=0.05)
        assert abs(wp.arc_lengths[-1] - 0.3) <= 1e-3 * 0.3
        oracle = fine_grid_arcs(profile, wp.times)
        assert np.abs(wp.arc_lengths - oracle).max() < 1e-4

    profile = random_rescaled_profile(1, length=0.3)
    with pytest.raises(ValueError):
        temporal_waypoints(profile, make_path("sagittal", 0.3), dt_step=0.0)
    with pytest.raises(ValueError):
        temporal_waypoints(profile, make_path("sagittal", 0.3),
                           dt_step=profile.duration * 2)


def test_regime_conservation():
    # both regimes describe the same motion: interpolate each list onto a
    # fine grid and compare positions; the agreement is limited by the
    # chord error of the coarser list (~0.4 * ds on convex stretches), so
    # the tight bound needs fine steps
    profile = random_rescaled_profile(11)
    path = make_path("frontal", 0.6)
    grid = np.linspace(0.0, profile.duration, 2000)

    sp = spatial_waypoints(profile, path, ds=0.001)
    tp = temporal_waypoints(profile, path, dt_step=0.005)
    arc_sp = np.interp(grid, sp.times, sp.arc_lengths)
    arc_tp = np.interp(grid, tp.times, tp.arc_lengths)
    assert np.abs(arc_sp - arc_tp).max() < 1e-3

    sp = spatial_waypoints(profile, path, ds=0.01)
    tp = temporal_waypoints(profile, path, dt_step=0.05)
    arc_sp = np.interp(grid, sp.times, sp.arc_lengths)
    arc_tp = np.interp(grid, tp.times, tp.arc_lengths)
    assert np.abs(arc_sp - arc_tp).max() < 0.5 * 0.01


def test_waypoint_validation():
    with pytest.raises(ValueError):
        TimedWaypointList(np.array([0.0, 0.1]), np.zeros((3, 3)))
    with pytest.raises(ValueError):  # non-monotone time
        TimedWaypointList(np.array([0.0, 0.2, 0.1]),
                          np.array([[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0]], dtype=float))
    with pytest.raises(ValueError):  # not collinear
        TimedWaypointList(np.array([0.0, 0.1, 0.2]),
                          np.array([[0, 0, 0], [0.1, 0.1, 0], [0.2, 0, 0]], dtype=float))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def test_lag_step_analytic_response():
    # 10 equal steps to t = tau must land exactly on 1 - e^-1
    v = 0.0
    for _ in range(10):
        v = lag_step(v, 1.0, tau=0.08, dt=0.008)
    assert v == pytest.approx(1.0 - np.exp(-1.0), abs=1e-12)


def test_trace_step_response_near_analytic():
    # constant-speed schedule = step command from rest
    profile = VelocityProfile(np.full(81, 0.5), dt=0.025)  # 2 s at 0.5 m/s
    wp = temporal_waypoints(rescale_profile(profile, 1.0),
                            make_path("frontal", 1.0), dt_step=0.1)
    actuator = ActuatorModel(v_max=10.0, a_max=1e6, tau=0.08, control_dt=0.005)
    trace = simulate_execution(wp, actuator)
    k = int(round(0.08 / 0.005))
    expected = 0.5 * (1.0 - np.exp(-1.0))
    assert trace.speeds[k] == pytest.approx(expected, rel=2e-3)


def test_ideal_actuator_tracks_plan():
    preset = builtin_presets()["ideal"]
    profile = random_rescaled_profile(3)
    wp = temporal_waypoints(profile, make_path("frontal", 0.6), preset.dt_step)
    trace = simulate_execution(wp, preset.actuator)
    metrics = compare(profile, executed_speed(trace))
    assert metrics.pearson_r >= 0.999
    assert abs(metrics.peak_executed / metrics.peak_planned - 1.0) < 0.01


def test_v_max_clamps_executed_peak():
    profile = random_rescaled_profile(4)  # NC, planned peak ~0.8-1.0
    wp = spatial_waypoints(profile, make_path("frontal", 0.6), 0.01)
    capped = ActuatorModel(v_max=0.3, a_max=1e6, tau=1e-4)
    trace = simulate_execution(wp, capped)
    assert executed_speed(trace).peak <= 0.3 + 1e-9


def test_trace_speed_column_matches_executed_speed():
    profile = random_rescaled_profile(9)
    wp = spatial_waypoints(profile, make_path("frontal", 0.6), 0.01)
    trace = simulate_execution(wp, builtin_presets()["baxter-like"].actuator,
                               noise_seed=5, noise_sd=0.005)
    recomputed = executed_speed(trace)
    assert np.abs(recomputed.samples - trace.speeds).max() < 1e-6


def test_energy_sanity_without_clamps():
    profile = random_rescaled_profile(13)
    wp = spatial_waypoints(profile, make_path("frontal", 0.6), 0.01)
    actuator = ActuatorModel(v_max=1e6, a_max=1e6, tau=0.03)
    trace = simulate_execution(wp, actuator)
    executed = executed_speed(trace)
    path_len = np.linalg.norm(trace.positions[-1] - trace.positions[0])
    assert abs(executed.integral() - path_len) <= 5e-3 * path_len


def test_executed_speed_cases():
    # uniform linear motion at 0.5 m/s
    times = np.arange(11) * 0.1
    positions = np.zeros((11, 3))
    positions[:, 0] = 0.05 * np.arange(11)
    from kinegen.trajectory import ExecutionTrace
    trace = ExecutionTrace(times, positions, np.full(11, 0.5), {})
    speeds = executed_speed(trace).samples
    assert np.allclose(speeds[1:-1], 0.5, atol=1e-12)

    still = ExecutionTrace(times, np.zeros((11, 3)), np.zeros(11), {})
    assert np.all(executed_speed(still).samples == 0.0)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def test_compare_identity_scale_and_shift():
    profile = random_rescaled_profile(21)
    same = compare(profile, profile)
    assert same.pearson_r == pytest.approx(1.0, abs=1e-12)
    assert same.peak_delay == 0.0
    assert same.peak_executed == same.peak_planned

    scaled = VelocityProfile(profile.samples * 0.8, profile.dt)
    m = compare(profile, scaled)
    assert m.pearson_r == pytest.approx(1.0, abs=1e-12)
    assert m.peak_executed / m.peak_planned == pytest.approx(0.8)

    # shift by +0.1 s (two samples at dt=0.05), zero-padded at the front
    base = np.zeros(40)
    base[5:25] = np.sin(np.linspace(0.0, np.pi, 20))
    planned = VelocityProfile(base, dt=0.05)
    shifted = VelocityProfile(np.concatenate([[0.0, 0.0], base[:-2]]), dt=0.05)
    m = compare(planned, shifted)
    assert m.peak_delay == pytest.approx(0.1, abs=1e-9)


def test_repeat_runs_noise_free_is_constant():
    profile = synth_profile(CarefulnessClass.CAREFUL, 2, SynthConfig())
    path = make_path("frontal", 0.6)
    actuator = builtin_presets()["baxter-like"].actuator
    metrics, summary = repeat_runs(profile, path, actuator, n=4, seed=9,
                                   regime="spatial", noise_sd=0.0)
    rs = [m.pearson_r for m in metrics]
    assert max(rs) - min(rs) == 0.0
    assert summary["pearson_r"]["q3"] - summary["pearson_r"]["q1"] == 0.0


def test_repeat_runs_with_noise_stays_close_to_noiseless():
    profile = synth_profile(CarefulnessClass.CAREFUL, 2, SynthConfig())
    path = make_path("frontal", 0.6)
    actuator = builtin_presets()["baxter-like"].actuator
    noiseless, _ = repeat_runs(profile, path, actuator, n=1, seed=0, noise_sd=0.0)
    noisy, summary = repeat_runs(profile, path, actuator, n=10, seed=3,
                                 noise_sd=0.01)
    assert summary["pearson_r"]["q3"] > summary["pearson_r"]["q1"]  # nonzero spread
    assert abs(summary["pearson_r"]["median"] - noiseless[0].pearson_r) <= 0.02


def test_repeat_runs_deterministic():
    profile = synth_profile(CarefulnessClass.NOT_CAREFUL, 6, SynthConfig())
    path = make_path("oblique", 0.6)
    actuator = builtin_presets()["baxter-like"].actuator
    a, _ = repeat_runs(profile, path, actuator, n=3, seed=4)
    b, _ = repeat_runs(profile, path, actuator, n=3, seed=4)
    assert [m.pearson_r for m in a] == [m.pearson_r for m in b]


def test_presets_round_trip(tmp_path):
    presets = builtin_presets()
    assert set(presets) == {"baxter-like", "icub-like", "ideal"}
    assert presets["baxter-like"].actuator.v_max == 1.0
    assert presets["baxter-like"].path_length_for("frontal") == 0.60
    assert presets["icub-like"].regime == "temporal"

    path = tmp_path / "presets.json"
    save_presets(presets, path)
    loaded = load_presets(path)
    assert set(loaded) == set(presets)
    for name in presets:
        assert loaded[name].actuator == presets[name].actuator
        assert loaded[name].path_lengths == presets[name].path_lengths
