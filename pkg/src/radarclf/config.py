"""Experiment configuration: one file drives every pipeline stage.

Two interchangeable formats are accepted. JSON gives the nested dict
directly; the plain-text format is one dotted ``key = value`` pair per line:

    seed = 7
    forest.n_trees = 30
    dbscan.eps_xy_m = 1.5
    cv.methods = multiclass, pwc2, pwc-ova2
    scene.n_objects.car = 60

Unknown keys are rejected with the full key path, so typos fail loudly
instead of silently running defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

from .clustering import DbscanParams
from .data_model import CLASS_NAMES
from .ensemble import CouplingMethod
from .features import FEATURE_NAMES
from .forest import ForestConfig
from .imbalance import RESAMPLE_METHODS, ResampleSpec
from .synthgen import DEFAULT_MIX


class ConfigError(ValueError):
    """Configuration file violates the schema."""


@dataclass(frozen=True)
class CvSettings:
    outer_folds: int = 10
    inner_folds: int = 10
    nested: bool = False
    methods: tuple[str, ...] = ("multiclass",)
    resamples: tuple[str, ...] = ("none",)

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ConfigError("fold counts must be >= 2")
        if not self.methods:
            raise ConfigError("cv.methods must not be empty")
        for m in self.methods:
            coupling_method(m)
        for r in self.resamples:
            if r not in RESAMPLE_METHODS:
                raise ConfigError(f"unknown resample method {r!r}")


@dataclass(frozen=True)
class SceneSettings:
    n_objects: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_MIX))
    duration_s: float = 30.0
    azimuth_noise_scale: float = 1.0
    quantize: bool = True

    def __post_init__(self):
        for name in self.n_objects:
            if name not in CLASS_NAMES:
                raise ConfigError(f"unknown class in scene.n_objects: "
                                  f"{name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    jobs: int = 1
    method: str = "multiclass"
    features: tuple[str, ...] | str = "all"
    two_stage_threshold: float | None = None
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    resample: ResampleSpec = field(default_factory=ResampleSpec)
    forest: ForestConfig = field(default_factory=ForestConfig)
    cv: CvSettings = field(default_factory=CvSettings)
    scene: SceneSettings = field(default_factory=SceneSettings)

    def __post_init__(self):
        coupling_method(self.method)
        if self.features != "all":
            unknown = [nm for nm in self.features
                       if nm not in FEATURE_NAMES]
            if unknown:
                raise ConfigError(f"unknown feature names: {unknown}")
        if self.two_stage_threshold is not None and not (
                0.0 <= self.two_stage_threshold <= 1.0):
            raise ConfigError("two_stage_threshold must lie in [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def coupling_method(name: str) -> CouplingMethod:
    try:
        return CouplingMethod(name)
    except ValueError:
        valid = ", ".join(m.value for m in CouplingMethod)
        raise ConfigError(
            f"unknown coupling method {name!r} (one of: {valid})") from None


# -- schema-checked construction ---------------------------------------------------

_SECTION_KEYS = {
    "dbscan": ("eps_xy_m", "eps_t_s", "eps_vr_mps", "min_pts"),
    "resample": ("method", "k_neighbors", "floor_multiple"),
    "forest": ("n_trees", "split_criterion", "max_features", "bootstrap"),
    "cv": ("outer_folds", "inner_folds", "nested", "methods", "resamples"),
    "scene": ("n_objects", "duration_s", "azimuth_noise_scale", "quantize"),
}
_TOP_KEYS = ("seed", "jobs", "method", "features", "two_stage_threshold",
             *_SECTION_KEYS)


def _coerce_scalar(value: Any, want: type, path: str):
    if want is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if want is int:
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{path}: expected integer, got {value!r}"
                              ) from None
    if want is float:
        if isinstance(value, bool):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected number, got {value!r}"
                              ) from None
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    raise AssertionError(f"unhandled scalar type {want}")


def _name_list(value: Any, path: str) -> tuple[str, ...]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",")]
        return tuple(p for p in parts if p)
    if isinstance(value, (list, tuple)):
        return tuple(_coerce_scalar(v, str, path) for v in value)
    raise ConfigError(f"{path}: expected a name or comma-separated list")


def _check_keys(section: Mapping, allowed, where: str):
    unknown = [k for k in section if k not in allowed]
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: "
                          f"{', '.join(sorted(unknown))}")


def config_from_dict(d: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("configuration root must be a mapping")
    _check_keys(d, _TOP_KEYS, "configuration")
    kw: dict[str, Any] = {}
    if "seed" in d:
        kw["seed"] = _coerce_scalar(d["seed"], int, "seed")
    if "jobs" in d:
        kw["jobs"] = _coerce_scalar(d["jobs"], int, "jobs")
    if "method" in d:
        kw["method"] = _coerce_scalar(d["method"], str, "method")
    if "features" in d:
        v = d["features"]
        kw["features"] = ("all" if v == "all"
                          else _name_list(v, "features"))
    if "two_stage_threshold" in d and d["two_stage_threshold"] is not None:
        kw["two_stage_threshold"] = _coerce_scalar(
            d["two_stage_threshold"], float, "two_stage_threshold")

    if "dbscan" in d:
        sec = d["dbscan"]
        _check_keys(sec, _SECTION_KEYS["dbscan"], "dbscan")
        kw["dbscan"] = DbscanParams(
            eps_xy_m=_coerce_scalar(sec.get("eps_xy_m", 1.5), float,
                                    "dbscan.eps_xy_m"),
            eps_t_s=_coerce_scalar(sec.get("eps_t_s", 0.16), float,
                                   "dbscan.eps_t_s"),
            eps_vr_mps=_coerce_scalar(sec.get("eps_vr_mps", 1.0), float,
                                      "dbscan.eps_vr_mps"),
            min_pts=_coerce_scalar(sec.get("min_pts", 2), int,
                                   "dbscan.min_pts"))
    if "resample" in d:
        sec = d["resample"]
        _check_keys(sec, _SECTION_KEYS["resample"], "resample")
        method = _coerce_scalar(sec.get("method", "none"), str,
                                "resample.method")
        if method not in RESAMPLE_METHODS:
            raise ConfigError(f"unknown resample method {method!r}")
        kw["resample"] = ResampleSpec(
            method=method,
            k_neighbors=_coerce_scalar(sec.get("k_neighbors", 5), int,
                                       "resample.k_neighbors"),
            floor_multiple=_coerce_scalar(sec.get("floor_multiple", 5), int,
                                          "resample.floor_multiple"))
    if "forest" in d:
        sec = d["forest"]
        _check_keys(sec, _SECTION_KEYS["forest"], "forest")
        mf = sec.get("max_features", "sqrt")
        if isinstance(mf, str) and mf != "sqrt":
            try:
                mf = int(mf)
            except ValueError:
                raise ConfigError("forest.max_features: expected 'sqrt' or "
                                  f"an integer, got {mf!r}") from None
        kw["forest"] = ForestConfig(
            n_trees=_coerce_scalar(sec.get("n_trees", 50), int,
                                   "forest.n_trees"),
            split_criterion=_coerce_scalar(
                sec.get("split_criterion", "gini"), str,
                "forest.split_criterion"),
            max_features=mf,
            bootstrap=_coerce_scalar(sec.get("bootstrap", True), bool,
                                     "forest.bootstrap"))
    if "cv" in d:
        sec = d["cv"]
        _check_keys(sec, _SECTION_KEYS["cv"], "cv")
        kw["cv"] = CvSettings(
            outer_folds=_coerce_scalar(sec.get("outer_folds", 10), int,
                                       "cv.outer_folds"),
            inner_folds=_coerce_scalar(sec.get("inner_folds", 10), int,
                                       "cv.inner_folds"),
            nested=_coerce_scalar(sec.get("nested", False), bool,
                                  "cv.nested"),
            methods=_name_list(sec.get("methods", "multiclass"),
                               "cv.methods"),
            resamples=_name_list(sec.get("resamples", "none"),
                                 "cv.resamples"))
    if "scene" in d:
        sec = d["scene"]
        _check_keys(sec, _SECTION_KEYS["scene"], "scene")
        objs = sec.get("n_objects", dict(DEFAULT_MIX))
        if not isinstance(objs, Mapping):
            raise ConfigError("scene.n_objects must be a mapping")
        counts = {k: _coerce_scalar(v, int, f"scene.n_objects.{k}")
                  for k, v in objs.items()}
        kw["scene"] = SceneSettings(
            n_objects=counts,
            duration_s=_coerce_scalar(sec.get("duration_s", 30.0), float,
                                      "scene.duration_s"),
            azimuth_noise_scale=_coerce_scalar(
                sec.get("azimuth_noise_scale", 1.0), float,
                "scene.azimuth_noise_scale"),
            quantize=_coerce_scalar(sec.get("quantize", True), bool,
                                    "scene.quantize"))
    try:
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_text(text: str) -> dict:
    root: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        node = root
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"line {lineno}: {key!r} nests under a "
                                  f"scalar")
        if parts[-1] in node and isinstance(node[parts[-1]], dict):
            raise ConfigError(f"line {lineno}: {key!r} overwrites a section")
        node[parts[-1]] = value
    return root


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        return config_from_dict(data)
    return config_from_dict(_parse_text(text))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-dict form used for manifests; stable key order via sorting."""
    return {
        "seed": cfg.seed,
        "jobs": cfg.jobs,
        "method": cfg.method,
        "features": (cfg.features if cfg.features == "all"
                     else list(cfg.features)),
        "two_stage_threshold": cfg.two_stage_threshold,
        "dbscan": {f.name: getattr(cfg.dbscan, f.name)
                   for f in fields(cfg.dbscan)},
        "resample": {"method": cfg.resample.method,
                     "k_neighbors": cfg.resample.k_neighbors,
                     "floor_multiple": cfg.resample.floor_multiple},
        "forest": {"n_trees": cfg.forest.n_trees,
                   "split_criterion": cfg.forest.split_criterion,
                   "max_features": cfg.forest.max_features,
                   "bootstrap": cfg.forest.bootstrap},
        "cv": {"outer_folds": cfg.cv.outer_folds,
               "inner_folds": cfg.cv.inner_folds,
               "nested": cfg.cv.nested,
               "methods": list(cfg.cv.methods),
               "resamples": list(cfg.cv.resamples)},
        "scene": {"n_objects": dict(sorted(cfg.scene.n_objects.items())),
                  "duration_s": cfg.scene.duration_s,
                  "azimuth_noise_scale": cfg.scene.azimuth_noise_scale,
                  "quantize": cfg.scene.quantize},
    }
