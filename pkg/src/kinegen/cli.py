"""Command-line workflow: generate, train, synthesize, evaluate, execute, report.

All randomness flows from one master seed through named sub-streams (corpus,
ae, gan, synth, exec), so stages can be rerun independently yet reproducibly.
Exit codes: 0 success, 2 argument/config error, 3 IO error, 4 numerical
failure. KINEGEN_THREADS caps worker parallelism during execution.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import autoencoder as ae_mod
from . import cgan as gan_mod
from .errors import ConfigError, NumericalError, ParseError
from .metrics import build_fidelity_report, write_fidelity_report
from .neural import AdamHyper, load_checkpoint, save_checkpoint
from .profiles import (CarefulnessClass, ClassSynthParams, NormStats,
                       ProfileCorpus, SynthConfig, load_corpus, make_dataset,
                       save_corpus)
from .rng import rng_for
from .trajectory import (ExecutionPreset, Plane, builtin_presets, compare,
                         executed_speed, load_presets, make_path,
                         rescale_profile, save_presets, simulate_execution,
                         spatial_waypoints, temporal_waypoints)

METRICS_HEADER = ["profile_id", "class", "plane", "repetition", "peak_planned",
                  "peak_executed", "pearson_r", "peak_delay_s"]


def stage_seed(master: int, stage: str) -> int:
    """Per-stage sub-seed derived from the master seed."""
    return int(rng_for(master, stage).integers(0, 2**63 - 1))


def worker_count() -> int:
    """Worker cap from KINEGEN_THREADS (default 1 = serial)."""
    raw = os.environ.get("KINEGEN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"KINEGEN_THREADS must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def load_config_file(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return payload


def build_synth_config(section: dict) -> SynthConfig:
    kwargs = dict(section)
    for cls_key in ("not_careful", "careful"):
        if cls_key in kwargs:
            entry = kwargs[cls_key]
            kwargs[cls_key] = ClassSynthParams(
                tuple(entry["duration_range"]), tuple(entry["peak_range"]))
    try:
        cfg = SynthConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad corpus config: {exc}") from exc
    cfg.validate()
    return cfg


def _section(config: dict, name: str) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return dict(section)


def parse_label(text) -> CarefulnessClass:
    mapping = {"c": CarefulnessClass.CAREFUL, "careful": CarefulnessClass.CAREFUL,
               "1": CarefulnessClass.CAREFUL,
               "nc": CarefulnessClass.NOT_CAREFUL,
               "not_careful": CarefulnessClass.NOT_CAREFUL,
               "0": CarefulnessClass.NOT_CAREFUL}
    key = str(text).strip().lower()
    if key not in mapping:
        raise ConfigError(f"unknown label {text!r} (use careful/not_careful)")
    return mapping[key]


def _resolve_out(args) -> Path:
    return Path(args.out)


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    section = _section(config, "corpus")
    if args.nc is not None:
        section["n_not_careful"] = args.nc
    if args.c is not None:
        section["n_careful"] = args.c
    cfg = build_synth_config(section)

    out = _resolve_out(args)
    corpus = make_dataset(cfg, stage_seed(seed, "corpus"))
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / "corpus.csv", seed=seed, config=cfg.to_dict())

    nc = len(corpus.by_class(CarefulnessClass.NOT_CAREFUL))
    c = len(corpus.by_class(CarefulnessClass.CAREFUL))
    print(f"wrote {out / 'corpus.csv'}: {len(corpus)} profiles "
          f"({nc} not-careful, {c} careful)")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _adam_from(section: dict) -> AdamHyper:
    return AdamHyper(lr=float(section.pop("lr", 1e-3)))


def cmd_train(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    out = _resolve_out(args)

    corpus_path = Path(args.corpus) if args.corpus else out / "corpus.csv"
    _require_file(corpus_path, "corpus")
    corpus = load_corpus(corpus_path)

    ae_section = _section(config, "autoencoder")
    ae_adam = _adam_from(ae_section)
    ae_epochs = args.epochs if args.epochs is not None else ae_section.pop("epochs", 300)
    ae_batch = ae_section.pop("batch_size", 32)
    try:
        ae_config = ae_mod.AutoencoderConfig(**ae_section)
    except TypeError as exc:
        raise ConfigError(f"bad autoencoder config: {exc}") from exc

    gan_section = _section(config, "gan")
    gan_adam = _adam_from(gan_section)
    gan_epochs = (args.gan_epochs if args.gan_epochs is not None
                  else gan_section.pop("epochs", 500))
    gan_batch = gan_section.pop("batch_size", 32)

    out.mkdir(parents=True, exist_ok=True)
    ae_ckpt = out / "autoencoder.json"
    stage = args.stage

    if stage in ("all", "ae"):
        model, history = ae_mod.train_autoencoder(
            corpus, ae_mod.TrainConfig(epochs=int(ae_epochs), batch_size=int(ae_batch),
                                       adam=ae_adam),
            seed=stage_seed(seed, "ae"), model_config=ae_config)
        save_checkpoint(ae_ckpt, model.params, "autoencoder", {
            **model.config.to_dict(),
            "normalization": {"min": corpus.normalization.min,
                              "max": corpus.normalization.max},
        })
        ae_mod.write_training_log(history, out / "ae_training_log.csv")
        print(f"autoencoder: {len(history)} epochs, "
              f"final held-out mse {history[-1]['heldout_mse']:.6f} -> {ae_ckpt}")

    if stage in ("all", "gan"):
        if not ae_ckpt.is_file():
            raise FileNotFoundError(
                f"autoencoder checkpoint not found: {ae_ckpt}; "
                f"train the autoencoder stage first")
        ae_model, stats = load_autoencoder_checkpoint(ae_ckpt)
        try:
            gan_config = gan_mod.GanConfig(
                n_steps=ae_model.config.n_steps,
                latent_dim=ae_model.config.latent_dim, **gan_section)
        except TypeError as exc:
            raise ConfigError(f"bad gan config: {exc}") from exc
        model, history = gan_mod.train_gan(
            corpus, ae_model,
            gan_mod.GanTrainConfig(epochs=int(gan_epochs), batch_size=int(gan_batch),
                                   adam=gan_adam),
            seed=stage_seed(seed, "gan"), model_config=gan_config)
        save_checkpoint(out / "cgan.json", model.params, "cgan", model.config.to_dict())
        gan_mod.write_training_log(history, out / "gan_training_log.csv")
        print(f"cgan: {len(history)} epochs, final d_loss "
              f"{history[-1]['d_loss']:.4f} l2 {history[-1]['l2_term']:.4f} "
              f"-> {out / 'cgan.json'}")
    return 0


def load_autoencoder_checkpoint(path):
    """Rebuild the autoencoder model and its normalization stats."""
    params, kind, config = load_checkpoint(path)
    if kind != "autoencoder":
        raise ParseError(f"{path}: expected an autoencoder checkpoint, got {kind!r}")
    norm = config.get("normalization")
    if not norm:
        raise ParseError(f"{path}: checkpoint lacks normalization stats")
    model_config = ae_mod.AutoencoderConfig(
        n_steps=int(config["n_steps"]), latent_dim=int(config["latent_dim"]),
        hidden_dim=int(config["hidden_dim"]))
    model = ae_mod.AutoencoderModel(params, model_config)
    return model, NormStats(float(norm["min"]), float(norm["max"]))


def load_gan_checkpoint(path):
    params, kind, config = load_checkpoint(path)
    if kind != "cgan":
        raise ParseError(f"{path}: expected a cgan checkpoint, got {kind!r}")
    model_config = gan_mod.GanConfig(
        n_steps=int(config["n_steps"]), noise_dim=int(config["noise_dim"]),
        latent_dim=int(config["latent_dim"]), gen_hidden=int(config["gen_hidden"]),
        disc_hidden=int(config["disc_hidden"]),
        lambda_l2=float(config["lambda_l2"]))
    return gan_mod.GanModel(params, model_config)


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def cmd_synthesize(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    out = _resolve_out(args)

    ae_path = Path(args.ae) if args.ae else out / "autoencoder.json"
    gan_path = Path(args.gan) if args.gan else out / "cgan.json"
    _require_file(ae_path, "autoencoder checkpoint")
    _require_file(gan_path, "cgan checkpoint")
    ae_model, stats = load_autoencoder_checkpoint(ae_path)
    gan_model = load_gan_checkpoint(gan_path)

    labels = ([parse_label(args.label)] if args.label
              else [CarefulnessClass.NOT_CAREFUL, CarefulnessClass.CAREFUL])
    n = args.n if args.n is not None else 100

    synth_master = stage_seed(seed, "synth")
    profiles = []
    for label in labels:
        profiles.extend(gan_mod.synthesize(
            gan_model, ae_model, label, n,
            seed=stage_seed(synth_master, f"label-{int(label)}"), stats=stats))

    corpus = ProfileCorpus(profiles, stats, list(range(len(profiles))), [])
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "synthetic.csv"
    save_corpus(corpus, dest, seed=seed,
                config={"n_per_label": n, "labels": [int(l) for l in labels]})
    print(f"wrote {dest}: {len(profiles)} synthetic profiles "
          f"({', '.join(str(int(l)) for l in labels)})")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    out = _resolve_out(args)
    real_path = _require_file(args.real, "real corpus")
    synth_path = _require_file(args.synth, "synthetic corpus")
    real = load_corpus(real_path)
    synth = load_corpus(synth_path)

    thresholds = _section(config, "evaluate")
    n_steps = int(thresholds.get("n_steps", 64))
    report = build_fidelity_report(real, synth.profiles, n_steps=n_steps)
    write_fidelity_report(report, out)
    print(f"label consistency: {report.label_accuracy:.3f}")
    print(f"nn distance quantiles: {report.nn_quantiles}")

    min_acc = thresholds.get("min_label_accuracy")
    if min_acc is not None:
        verdict = "PASS" if report.label_accuracy >= float(min_acc) else "FAIL"
        print(f"threshold min_label_accuracy={min_acc}: {verdict}")
    print(f"wrote report.json, pca_points.csv, nn_distances.csv, class_stats.csv -> {out}")
    return 0


# ---------------------------------------------------------------------------
# execute
# ---------------------------------------------------------------------------

def _resolve_preset(args, config: dict) -> ExecutionPreset:
    presets = builtin_presets()
    presets_file = args.presets_file or config.get("presets_file")
    if presets_file:
        presets.update(load_presets(_require_file(presets_file, "presets file")))
    name = args.preset or _section(config, "execute").get("preset", "baxter-like")
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: "
                          f"{', '.join(sorted(presets))}")
    return presets[name]


def _select_profiles(corpus: ProfileCorpus, per_class: int, rng) -> list[tuple[int, object]]:
    """Pick up to per_class profiles of each class present, at random."""
    chosen = []
    for label in (CarefulnessClass.NOT_CAREFUL, CarefulnessClass.CAREFUL):
        indices = [i for i, p in enumerate(corpus.profiles) if p.label == label]
        if not indices:
            continue
        take = min(per_class, len(indices))
        picks = rng.choice(len(indices), size=take, replace=False)
        chosen.extend((indices[int(i)], corpus.profiles[indices[int(i)]])
                      for i in sorted(picks))
    if not chosen:
        raise ValueError("corpus has no labelled profiles to execute")
    return chosen


def _execute_job(pid, profile, plane, preset, reps, noise_sd, exec_seed):
    path = make_path(plane, preset.path_length_for(plane))
    planned = rescale_profile(profile, path.length)
    if preset.regime == "spatial":
        waypoints = spatial_waypoints(planned, path, preset.ds)
    else:
        waypoints = temporal_waypoints(planned, path, preset.dt_step)
    rows = []
    traces = []
    for rep in range(reps):
        rep_seed = int(rng_for(exec_seed, "rep", pid, plane.value, rep)
                       .integers(0, 2**63 - 1))
        trace = simulate_execution(waypoints, preset.actuator, noise_seed=rep_seed,
                                   noise_sd=noise_sd,
                                   metadata={"profile_id": pid,
                                             "plane": plane.value,
                                             "repetition": rep})
        metrics = compare(planned, executed_speed(trace))
        rows.append([pid, int(profile.label), plane.value, rep,
                     repr(metrics.peak_planned), repr(metrics.peak_executed),
                     repr(metrics.pearson_r), repr(metrics.peak_delay)])
        traces.append(trace)
    return rows, traces


def cmd_execute(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    out = _resolve_out(args)
    section = _section(config, "execute")

    profiles_path = Path(args.profiles) if args.profiles else out / "corpus.csv"
    _require_file(profiles_path, "profiles file")
    corpus = load_corpus(profiles_path)

    preset = _resolve_preset(args, config)
    noise_sd = args.noise if args.noise is not None else section.get("noise", preset.noise_sd)
    reps = args.reps if args.reps is not None else section.get("reps", 10)
    per_class = (args.per_class if args.per_class is not None
                 else section.get("per_class", 3))
    if reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {reps}")
    if float(noise_sd) < 0:
        raise ConfigError(f"--noise must be >= 0, got {noise_sd}")
    plane_names = args.plane or section.get("planes") or [p.value for p in Plane]
    try:
        planes = [Plane(p) for p in plane_names]
    except ValueError as exc:
        raise ConfigError(f"unknown plane in {plane_names}") from exc

    exec_seed = stage_seed(seed, "exec")
    chosen = _select_profiles(corpus, int(per_class), rng_for(exec_seed, "selection"))

    jobs = [(pid, profile, plane) for pid, profile in chosen for plane in planes]
    out.mkdir(parents=True, exist_ok=True)
    traces_dir = out / "traces"
    traces_dir.mkdir(exist_ok=True)

    def run(job):
        pid, profile, plane = job
        return _execute_job(pid, profile, plane, preset, int(reps),
                            float(noise_sd), exec_seed)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for rows, _ in results:
            writer.writerows(rows)

    for rows, traces in results:
        for row, trace in zip(rows, traces):
            pid, _, plane, rep = row[0], row[1], row[2], row[3]
            name = f"trace_p{pid}_{plane}_r{rep}.csv"
            with open(traces_dir / name, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["t", "x", "y", "z", "speed_mps"])
                for t, pos, speed in zip(trace.times, trace.positions, trace.speeds):
                    writer.writerow([repr(float(t)), repr(float(pos[0])),
                                     repr(float(pos[1])), repr(float(pos[2])),
                                     repr(float(speed))])

    save_presets({preset.name: preset}, out / "preset.json")
    n_rows = sum(len(rows) for rows, _ in results)
    print(f"wrote {out / 'metrics.csv'}: {n_rows} rows "
          f"({len(chosen)} profiles x {len(planes)} planes x {reps} reps, "
          f"preset {preset.name})")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    metrics_path = _require_file(args.metrics, "metrics file")
    out = _resolve_out(args)
    by_group: dict = {}
    with open(metrics_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER:
            raise ParseError(f"{metrics_path}: unexpected header {reader.fieldnames}")
        for row in reader:
            key = (int(row["class"]), row["plane"])
            by_group.setdefault(key, []).append(row)
    if not by_group:
        raise ParseError(f"{metrics_path}: no metric rows")

    summary = {}
    for (cls, plane), rows in sorted(by_group.items()):
        rs = np.array([float(r["pearson_r"]) for r in rows])
        ratios = np.array([float(r["peak_executed"]) / float(r["peak_planned"])
                           for r in rows])
        delays = np.array([float(r["peak_delay_s"]) for r in rows])
        label = CarefulnessClass(cls).name.lower()
        summary.setdefault(label, {})[plane] = {
            "n": len(rows),
            "median_pearson_r": float(np.median(rs)),
            "median_peak_ratio": float(np.median(ratios)),
            "median_peak_delay_s": float(np.median(delays)),
        }
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "execution_summary.json"
    dest.write_text(json.dumps(summary, indent=1), encoding="utf-8")
    for label, planes in summary.items():
        for plane, stats in planes.items():
            print(f"{label:12s} {plane:9s} n={stats['n']:3d} "
                  f"median r={stats['median_pearson_r']:.4f} "
                  f"peak ratio={stats['median_peak_ratio']:.3f} "
                  f"delay={stats['median_peak_delay_s']:+.3f}s")
    print(f"wrote {dest}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinegen",
        description="Conditional velocity-profile generation and simulated execution")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags take precedence)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("generate", help="write the synthetic profile corpus")
    common(p)
    p.add_argument("--nc", type=int, default=None, help="not-careful profile count")
    p.add_argument("--c", type=int, default=None, help="careful profile count")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train autoencoder then conditional GAN")
    common(p)
    p.add_argument("--corpus", help="corpus CSV (default <out>/corpus.csv)")
    p.add_argument("--epochs", type=int, default=None, help="autoencoder epochs")
    p.add_argument("--gan-epochs", type=int, default=None, help="GAN epochs")
    p.add_argument("--stage", choices=("all", "ae", "gan"), default="all")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="sample new profiles from the trained models")
    common(p)
    p.add_argument("--ae", help="autoencoder checkpoint (default <out>/autoencoder.json)")
    p.add_argument("--gan", help="cgan checkpoint (default <out>/cgan.json)")
    p.add_argument("--label", default=None,
                   help="careful or not_careful (default: both)")
    p.add_argument("--n", type=int, default=None, help="profiles per label (default 100)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="fidelity report: synthetic vs real corpus")
    common(p)
    p.add_argument("--real", required=True, help="real corpus CSV")
    p.add_argument("--synth", required=True, help="synthetic corpus CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("execute", help="simulate end-effector execution of profiles")
    common(p)
    p.add_argument("--profiles", help="corpus CSV (default <out>/corpus.csv)")
    p.add_argument("--preset", default=None,
                   help="actuator preset (baxter-like, icub-like, ideal)")
    p.add_argument("--presets-file", default=None, help="JSON file with extra presets")
    p.add_argument("--plane", action="append", default=None,
                   help="movement plane (repeatable; default all three)")
    p.add_argument("--reps", type=int, default=None, help="repetitions per movement")
    p.add_argument("--noise", type=float, default=None,
                   help="commanded-speed noise sd (m/s)")
    p.add_argument("--per-class", type=int, default=None,
                   help="profiles selected per class (default 3)")
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("report", help="aggregate an execution metrics CSV")
    common(p)
    p.add_argument("--metrics", required=True, help="metrics.csv from execute")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ParseError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
