"""kinegen: conditional generation and simulated execution of transport velocity profiles."""

from .autoencoder import (AutoencoderConfig, AutoencoderModel, TrainConfig,
                          decode, encode, init_autoencoder, reconstruction_error,
                          train_autoencoder)
from .cgan import (GanConfig, GanModel, GanTrainConfig, condition_input,
                   discriminator_forward, generator_forward, gan_losses,
                   init_gan, synthesize, train_gan)
from .errors import (BatchError, ConfigError, DegenerateProfileError,
                     NumericalError, ParseError, ShapeError,
                     UndefinedCorrelationError)
from .metrics import (FidelityReport, Pca2D, build_fidelity_report, class_stats,
                      label_consistency, nearest_neighbor_distances, pca_fit,
                      pca_project, pearson, write_fidelity_report)
from .neural import (AdamHyper, AdamState, ParamSet, RecurrentState, adam_step,
                     bce, dense, grad_check, load_checkpoint, lstm_step,
                     save_checkpoint)
from .profiles import (DEFAULT_DT, CarefulnessClass, NormStats, ProfileCorpus,
                       SynthConfig, VelocityProfile, denormalize, load_corpus,
                       make_dataset, min_jerk_speed, normalize, resample,
                       save_corpus, synth_profile)
from .trajectory import (ActuatorModel, CartesianPath, ExecutionMetrics,
                         ExecutionPreset, ExecutionTrace, Plane,
                         TimedWaypointList, builtin_presets, compare,
                         cumulative_distance, executed_speed, load_presets,
                         make_path, repeat_runs, rescale_profile, save_presets,
                         simulate_execution, spatial_waypoints,
                         temporal_waypoints)

__version__ = "0.1.0"
