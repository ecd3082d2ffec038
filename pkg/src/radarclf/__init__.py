"""Radar road-user classification: clustering, features, binarized forests.

The processing chain turns per-cycle radar targets into classified objects:
density clustering groups targets, 150 ms windows cut cluster tracks into
samples, geometric and Doppler statistics become feature vectors, and random
forests (binarized one-vs-one / one-vs-all with probability coupling, or a
plain multiclass baseline) produce the final class decision.
"""

__version__ = "0.1.0"

from .clustering import NOISE, DbscanParams, dbscan
from .data_model import (CLASS_NAMES, NO_CLUSTER, V_STATIONARY_MPS,
                         WINDOW_LENGTH_S, AugmentationTag, ClassLabel,
                         ClusterSample, EgoState, RawDetection,
                         RejectedDetection, SensorPose, SensorSpec, Target,
                         TargetRecord, augment_drop, compensate_ego_motion,
                         read_targets_csv, samples_from_records,
                         target_from_polar, to_common_frame, window_samples,
                         write_targets_csv)
from .ensemble import (CouplingMethod, ModelBank, ProbabilityTable,
                       couple_ova, couple_pwc, couple_pwc_ova,
                       couple_pwc_ova2, delta, load_bank, save_bank,
                       train_binarized, train_model_bank, two_stage_truck)
from .evaluation import (EvaluationReport, NestedCvResult, confusion_matrix,
                         cross_validate, grouped_kfold, kfold_splits,
                         macro_f1, nested_cv, precision_recall_f1,
                         render_report)
from .features import (FEATURE_NAMES, N_FEATURES, REGISTRY_VERSION,
                       RegistryMismatch, extract, extract_matrix,
                       read_features_csv, write_features_csv)
from .forest import ForestConfig, RandomForest, class_weights, gini_impurity
from .imbalance import RESAMPLE_METHODS, ResampleSpec, resample
from .selection import (FeatureRanking, SubsetResult, backward_eliminate,
                        grouped_train_test_split, subset_sweep)
from .synthgen import (DEFAULT_MIX, DEFAULT_PROFILES, BenchmarkSet,
                       ClassProfile, SceneConfig, generate,
                       generate_feature_benchmark, generate_samples)

__all__ = [
    "__version__",
    # data model
    "CLASS_NAMES", "NO_CLUSTER", "V_STATIONARY_MPS", "WINDOW_LENGTH_S",
    "AugmentationTag", "ClassLabel", "ClusterSample", "EgoState",
    "RawDetection", "RejectedDetection", "SensorPose", "SensorSpec",
    "Target", "TargetRecord", "augment_drop", "compensate_ego_motion",
    "read_targets_csv", "samples_from_records", "target_from_polar",
    "to_common_frame", "window_samples", "write_targets_csv",
    # clustering
    "NOISE", "DbscanParams", "dbscan",
    # features
    "FEATURE_NAMES", "N_FEATURES", "REGISTRY_VERSION", "RegistryMismatch",
    "extract", "extract_matrix", "read_features_csv", "write_features_csv",
    # forest
    "ForestConfig", "RandomForest", "class_weights", "gini_impurity",
    # imbalance
    "RESAMPLE_METHODS", "ResampleSpec", "resample",
    # ensemble
    "CouplingMethod", "ModelBank", "ProbabilityTable", "couple_ova",
    "couple_pwc", "couple_pwc_ova", "couple_pwc_ova2", "delta", "load_bank",
    "save_bank", "train_binarized", "train_model_bank", "two_stage_truck",
    # selection
    "FeatureRanking", "SubsetResult", "backward_eliminate",
    "grouped_train_test_split", "subset_sweep",
    # evaluation
    "EvaluationReport", "NestedCvResult", "confusion_matrix",
    "cross_validate", "grouped_kfold", "kfold_splits", "macro_f1",
    "nested_cv", "precision_recall_f1", "render_report",
    # synthgen
    "DEFAULT_MIX", "DEFAULT_PROFILES", "BenchmarkSet", "ClassProfile",
    "SceneConfig", "generate", "generate_feature_benchmark",
    "generate_samples",
]
