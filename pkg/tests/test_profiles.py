"""Unit tests for the velocity-profile corpus."""

import numpy as np
import pytest

from kinegen.errors import ConfigError, ParseError
from kinegen.profiles import (CarefulnessClass, ClassSynthParams, NormStats,
                              ProfileCorpus, SynthConfig, VelocityProfile,
                              denormalize, load_corpus, make_dataset,
                              min_jerk_speed, normalize, resample, save_corpus,
                              synth_profile)

SMALL = SynthConfig(n_not_careful=12, n_careful=12)


def test_min_jerk_endpoints_and_midpoint():
    assert min_jerk_speed(0.0) == 0.0
    assert min_jerk_speed(1.0) == pytest.approx(0.0, abs=1e-12)
    # 30/4 - 60/8 + 30/16
    assert min_jerk_speed(0.5, amplitude=1.0) == pytest.approx(1.875, abs=1e-12)


def test_velocity_profile_invariants():
    with pytest.raises(ValueError):
        VelocityProfile(np.array([1.0]), 0.1)
    with pytest.raises(ValueError):
        VelocityProfile(np.array([0.0, -0.1]), 0.1)
    with pytest.raises(ValueError):
        VelocityProfile(np.array([0.0, np.nan]), 0.1)
    with pytest.raises(ValueError):
        VelocityProfile(np.array([0.0, 1.0]), 0.0)


def test_synth_profile_shape_and_endpoints():
    for label in CarefulnessClass:
        profile = synth_profile(label, seed=4, cfg=SMALL)
        assert profile.label == label
        assert profile.samples[0] == 0.0
        assert profile.samples[-1] == 0.0
        assert np.all(profile.samples >= 0.0)
        lo, hi = SMALL.params_for(label).duration_range
        assert lo * 0.9 <= profile.duration <= hi * 1.1


def test_synth_profile_deterministic():
    a = synth_profile(CarefulnessClass.CAREFUL, seed=123, cfg=SMALL)
    b = synth_profile(CarefulnessClass.CAREFUL, seed=123, cfg=SMALL)
    assert np.array_equal(a.samples, b.samples)
    assert a.dt == b.dt


def test_synth_profile_invalid_config():
    bad = SynthConfig(not_careful=ClassSynthParams((0.0, 1.0), (0.5, 1.0)))
    with pytest.raises(ConfigError):
        synth_profile(CarefulnessClass.NOT_CAREFUL, 0, bad)
    with pytest.raises(ConfigError):
        make_dataset(SynthConfig(n_careful=0), 0)


def test_make_dataset_default_counts():
    corpus = make_dataset(seed=0)
    assert len(corpus) == 1001
    assert len(corpus.by_class(CarefulnessClass.NOT_CAREFUL)) == 499
    assert len(corpus.by_class(CarefulnessClass.CAREFUL)) == 502


def test_make_dataset_tiny_counts():
    corpus = make_dataset(SynthConfig(n_not_careful=1, n_careful=1), seed=9)
    assert len(corpus) == 2
    assert {p.label for p in corpus.profiles} == set(CarefulnessClass)


def test_make_dataset_class_peak_separation():
    corpus = make_dataset(SynthConfig(n_not_careful=60, n_careful=60), seed=5)
    c_peaks = [p.peak for p in corpus.by_class(CarefulnessClass.CAREFUL)]
    nc_peaks = [p.peak for p in corpus.by_class(CarefulnessClass.NOT_CAREFUL)]
    assert np.median(c_peaks) < np.median(nc_peaks)
    # configured ranges are disjoint, so every C peak sits below every NC peak
    assert max(c_peaks) < min(nc_peaks)


def test_make_dataset_deterministic_and_split():
    a = make_dataset(SMALL, seed=77)
    b = make_dataset(SMALL, seed=77)
    for pa, pb in zip(a.profiles, b.profiles):
        assert np.array_equal(pa.samples, pb.samples)
    assert a.train_indices == b.train_indices
    assert a.heldout_indices == b.heldout_indices
    assert set(a.train_indices) | set(a.heldout_indices) == set(range(len(a)))
    assert not set(a.train_indices) & set(a.heldout_indices)
    # stats come from the training split only
    train_samples = np.concatenate([p.samples for p in a.train_profiles()])
    assert a.normalization.max == train_samples.max()


def test_resample_identity_and_ramp():
    profile = VelocityProfile(np.array([0.0, 2.0, 0.0]), dt=0.5)
    same = resample(profile, 3)
    assert np.array_equal(same.samples, profile.samples)

    hand = resample(profile, 5)
    assert np.allclose(hand.samples, [0.0, 1.0, 2.0, 1.0, 0.0], atol=1e-12)
    assert hand.duration == pytest.approx(profile.duration)

    ramp = VelocityProfile(np.linspace(0.0, 1.0, 9), dt=0.125)
    up = resample(ramp, 17)
    down = resample(up, 9)
    assert np.allclose(down.samples, ramp.samples, atol=1e-12)

    with pytest.raises(ValueError):
        resample(profile, 1)


def test_normalize_denormalize_round_trip():
    stats = NormStats(0.0, 2.5)
    profile = VelocityProfile(np.array([0.0, 1.0, 2.5, 0.3]), dt=0.1,
                              label=CarefulnessClass.CAREFUL)
    norm = normalize(profile, stats)
    assert norm.samples[0] == 0.0
    assert norm.samples[2] == 1.0
    assert norm.label == profile.label
    back = denormalize(norm, stats)
    assert np.max(np.abs(back.samples - profile.samples)) < 1e-12

    with pytest.raises(ConfigError):
        NormStats(1.0, 1.0)


def test_corpus_round_trip(tmp_path):
    corpus = make_dataset(SMALL, seed=3)
    path = tmp_path / "corpus.csv"
    save_corpus(corpus, path, seed=3, config=SMALL.to_dict())
    loaded = load_corpus(path)
    assert len(loaded) == len(corpus)
    for a, b in zip(loaded.profiles, corpus.profiles):
        assert np.array_equal(a.samples, b.samples)
        assert a.dt == b.dt
        assert a.label == b.label
    assert loaded.train_indices == corpus.train_indices
    assert loaded.heldout_indices == corpus.heldout_indices
    assert loaded.normalization == corpus.normalization


def test_save_is_byte_deterministic(tmp_path):
    corpus = make_dataset(SMALL, seed=3)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_corpus(corpus, p1, seed=3)
    save_corpus(corpus, p2, seed=3)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_negative_speed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "profile_id,label,dt,sample_index,speed_mps\n"
        "0,1,0.05,0,0.0\n"
        "0,1,0.05,1,-0.25\n")
    with pytest.raises(ParseError, match="line 3"):
        load_corpus(path)


def test_load_rejects_empty_and_garbled(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_corpus(empty)

    header_only = tmp_path / "header.csv"
    header_only.write_text("profile_id,label,dt,sample_index,speed_mps\n")
    with pytest.raises(ParseError):
        load_corpus(header_only)

    garbled = tmp_path / "garbled.csv"
    garbled.write_text(
        "profile_id,label,dt,sample_index,speed_mps\n"
        "0,1,zero,0,0.0\n")
    with pytest.raises(ParseError, match="line 2"):
        load_corpus(garbled)


def test_load_without_manifest(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text(
        "profile_id,label,dt,sample_index,speed_mps\n"
        "0,0,0.05,0,0.0\n"
        "0,0,0.05,1,0.5\n"
        "0,0,0.05,2,0.0\n")
    corpus = load_corpus(path)
    assert len(corpus) == 1
    assert corpus.train_indices == [0]
    assert corpus.heldout_indices == []


def test_profile_corpus_split_validation():
    profile = VelocityProfile(np.array([0.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        ProfileCorpus([profile], NormStats(0.0, 1.0), [0], [0])
    with pytest.raises(ValueError):
        ProfileCorpus([profile], NormStats(0.0, 1.0), [], [])
