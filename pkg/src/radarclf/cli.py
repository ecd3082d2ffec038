"""Command-line pipeline: generate, cluster, extract, select, train,
evaluate, predict, and the resumable end-to-end `pipeline` runner.

Exit codes: 0 success, 1 usage or configuration error, 2 bad or missing
input data, 3 internal error (including integrity failures on resume).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import dbscan
from .config import (ConfigError, ExperimentConfig, config_to_dict,
                     coupling_method, load_config)
from .data_model import (NO_CLUSTER, ClassLabel, TargetRecord,
                         read_targets_csv, samples_from_records,
                         window_samples, write_targets_csv)
from .ensemble import (CouplingMethod, dump_tables_jsonl, load_bank,
                       save_bank, train_binarized)
from .evaluation import nested_cv, render_report
from .features import (FEATURE_NAMES, REGISTRY_VERSION, RegistryMismatch,
                       extract_matrix, read_features_csv, write_features_csv)
from .forest import ForestConfig, RandomForest
from .selection import backward_eliminate, subset_sweep
from .synthgen import SceneConfig, generate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class DataError(Exception):
    """Missing or malformed input data."""


class IntegrityError(Exception):
    """A resumable stage found an output that no longer matches its hash."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; the contract here
    # reserves 2 for data problems
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    def __init__(self, message):
        super().__init__(message)


def _forest_factory(cfg: ExperimentConfig):
    base = cfg.forest

    def make(seed: int) -> RandomForest:
        return RandomForest(ForestConfig(
            n_trees=base.n_trees, split_criterion=base.split_criterion,
            max_features=base.max_features, bootstrap=base.bootstrap,
            seed=seed))
    return make


def _scene_config(cfg: ExperimentConfig) -> SceneConfig:
    s = cfg.scene
    return SceneConfig(n_objects=dict(s.n_objects), duration_s=s.duration_s,
                       seed=cfg.seed,
                       azimuth_noise_scale=s.azimuth_noise_scale,
                       quantize=s.quantize)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataError(f"{what} not found: {path}")
    return path


def _labeled_rows(X, y, groups, starts, object_ids):
    keep = y >= 0
    if not np.all(keep):
        logger.warning("dropping %d unlabeled row(s)",
                       int(np.sum(~keep)))
    return (X[keep], y[keep], groups[keep], starts[keep], object_ids[keep])


def _subset_columns(X, subset):
    if subset == "all":
        return X, tuple(FEATURE_NAMES)
    cols = [FEATURE_NAMES.index(nm) for nm in subset]
    return X[:, cols], tuple(subset)


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# -- subcommand bodies --------------------------------------------------------

def _cmd_generate(cfg: ExperimentConfig, args) -> int:
    records = generate(_scene_config(cfg))
    write_targets_csv(args.out, records)
    print(f"wrote {len(records)} targets to {args.out}")
    return EXIT_OK


def _cmd_cluster(cfg: ExperimentConfig, args) -> int:
    records = read_targets_csv(_require(Path(args.infile), "target file"))
    targets = [rec.target for rec in records]
    labels = dbscan(targets, cfg.dbscan)
    out = [TargetRecord(target=rec.target, cluster_id=int(labels[i]),
                        object_id=rec.object_id, label=rec.label)
           for i, rec in enumerate(records)]
    write_targets_csv(args.out, out)
    n_clusters = len(set(l for l in labels if l != NO_CLUSTER))
    n_noise = int(np.sum(np.asarray(labels) == NO_CLUSTER))
    print(f"{n_clusters} clusters, {n_noise} noise targets -> {args.out}")
    return EXIT_OK


def _cmd_extract(cfg: ExperimentConfig, args) -> int:
    records = read_targets_csv(_require(Path(args.infile), "target file"))
    if args.by == "object":
        by_obj: dict[int, list] = {}
        label_of: dict[int, ClassLabel | None] = {}
        for rec in records:
            if rec.object_id < 0:
                continue
            by_obj.setdefault(rec.object_id, []).append(rec.target)
            label_of[rec.object_id] = rec.label
        samples = []
        for oid in sorted(by_obj):
            samples.extend(window_samples(
                by_obj[oid], cluster_id=oid, object_id=oid,
                label=label_of[oid]))
    else:
        samples = samples_from_records(records)
    if not samples:
        raise DataError("no cluster samples to extract features from")
    X, y, groups, starts, object_ids = extract_matrix(samples)
    write_features_csv(args.out, X, y, groups, starts, object_ids)
    print(f"extracted {X.shape[0]} samples x {X.shape[1]} features "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_select(cfg: ExperimentConfig, args) -> int:
    X, y, groups, starts, object_ids = read_features_csv(
        _require(Path(args.features), "feature file"))
    X, y, groups, _, _ = _labeled_rows(X, y, groups, starts, object_ids)
    ranking = backward_eliminate(
        X, y, groups, FEATURE_NAMES, _forest_factory(cfg),
        seed=cfg.seed, n_jobs=cfg.jobs)
    ranking.save(args.out)
    print(f"ranking of {len(ranking.names)} features "
          f"({ranking.models_trained} models) -> {args.out}")
    if args.sweep_out:
        result = subset_sweep(
            X, y, groups, ranking, FEATURE_NAMES, _forest_factory(cfg),
            coarse_step=args.coarse_step, fine_step=args.fine_step,
            n_folds=min(cfg.cv.outer_folds, np.unique(groups).size),
            seed=cfg.seed, n_jobs=cfg.jobs)
        _dump_json(Path(args.sweep_out), result.to_dict())
        print(f"best subset: {result.best_size} features "
              f"(macro-F1 {result.best_score:.4f}) -> {args.sweep_out}")
    return EXIT_OK


def _cmd_train(cfg: ExperimentConfig, args) -> int:
    X, y, groups, starts, object_ids = read_features_csv(
        _require(Path(args.features), "feature file"))
    X, y, groups, _, _ = _labeled_rows(X, y, groups, starts, object_ids)
    if X.shape[0] == 0:
        raise DataError("no labeled rows to train on")
    method = coupling_method(args.method or cfg.method)
    Xs, names = _subset_columns(X, cfg.features)
    classes = tuple(int(c) for c in np.unique(y))
    bank = train_binarized(
        Xs, y, classes, method, _forest_factory(cfg),
        resample_spec=cfg.resample, seed=cfg.seed,
        feature_names=names, n_jobs=cfg.jobs)
    save_bank(bank, args.out)
    fams = ", ".join(sorted(bank.families_present()))
    print(f"trained {method.value} bank ({fams}) on {Xs.shape[0]} samples "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    X, y, groups, starts, object_ids = read_features_csv(
        _require(Path(args.features), "feature file"))
    X, y, groups, _, _ = _labeled_rows(X, y, groups, starts, object_ids)
    if X.shape[0] == 0:
        raise DataError("no labeled rows to evaluate")
    Xs, _ = _subset_columns(X, cfg.features)
    classes = tuple(int(c) for c in np.unique(y))
    methods = [coupling_method(m) for m in cfg.cv.methods]
    subset_tag = ("all" if cfg.features == "all"
                  else f"{len(cfg.features)} features")

    result = nested_cv(
        Xs, y, groups, classes, methods, list(cfg.cv.resamples),
        k_outer=cfg.cv.outer_folds, k_inner=cfg.cv.inner_folds,
        seed=cfg.seed, make_classifier=_forest_factory(cfg),
        feature_subset=subset_tag, n_jobs=cfg.jobs)
    baseline = args.baseline
    if baseline is None:
        baseline = ("multiclass+none"
                    if "multiclass+none" in result.reports
                    else result.case_names[0])
    class_names = [ClassLabel(c).to_str() for c in classes]
    text, _ = render_report(result.reports, baseline, class_names)
    payload = result.to_dict()
    payload["baseline"] = baseline
    payload["registry_version"] = REGISTRY_VERSION
    payload["version"] = __version__

    out_json = Path(f"{args.out_prefix}.json")
    out_text = Path(f"{args.out_prefix}.txt")
    _dump_json(out_json, payload)
    out_text.write_text(text, encoding="utf-8")
    print(text)
    print(f"report -> {out_json} and {out_text}")
    return EXIT_OK


def _cmd_predict(cfg: ExperimentConfig, args) -> int:
    bank = load_bank(_require(Path(args.model), "model file"))
    if bank.registry_version != REGISTRY_VERSION:
        raise RegistryMismatch(
            f"model built against registry {bank.registry_version!r}, "
            f"library provides {REGISTRY_VERSION!r}")
    X, y, groups, starts, object_ids = read_features_csv(
        _require(Path(args.features), "feature file"))
    names = bank.feature_names or tuple(FEATURE_NAMES)
    cols = [FEATURE_NAMES.index(nm) for nm in names]
    Xs = X[:, cols]

    method = bank.method or CouplingMethod.MULTICLASS
    thr = args.two_stage_thr
    if thr is None:
        thr = cfg.two_stage_threshold
    class_names = [ClassLabel(c).to_str() for c in bank.classes]
    header = ["cluster_id", "object_id", "window_start", "decision"]
    header += [f"score_{nm}" for nm in class_names]
    lines = [",".join(header)]
    if Xs.shape[0] > 0:
        decisions = bank.decide(Xs, method, two_stage_threshold=thr)
        scores = bank.scores(Xs, method)
        for i in range(Xs.shape[0]):
            row = [str(int(groups[i])), str(int(object_ids[i])),
                   format(float(starts[i]), ".17g"),
                   ClassLabel(int(decisions[i])).to_str()]
            row += [format(float(v), ".17g") for v in scores[i]]
            lines.append(",".join(row))
        if args.dump_tables:
            P, V = bank.predict_tables(Xs)
            if P is None:
                k = bank.n_classes
                P = np.zeros((Xs.shape[0], k, k))
            dump_tables_jsonl(args.dump_tables, P, V, bank.classes)
    elif args.dump_tables:
        Path(args.dump_tables).write_text("", encoding="utf-8")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{max(len(lines) - 1, 0)} predictions -> {args.out}")
    return EXIT_OK


# -- resumable pipeline ----------------------------------------------------------

def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage_key(name: str, config_slice, input_hashes: list[str]) -> str:
    blob = json.dumps({"stage": name, "config": config_slice,
                       "inputs": input_hashes,
                       "registry": REGISTRY_VERSION,
                       "version": __version__},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


class _Pipeline:
    def __init__(self, cfg: ExperimentConfig, workdir: Path):
        self.cfg = cfg
        self.workdir = workdir
        self.manifest_path = workdir / "manifest.json"
        self.manifest: dict = {"config": config_to_dict(cfg),
                               "version": __version__,
                               "registry_version": REGISTRY_VERSION,
                               "stages": {}}
        if self.manifest_path.exists():
            try:
                old = json.loads(self.manifest_path.read_text())
                if old.get("config") == self.manifest["config"]:
                    self.manifest["stages"] = old.get("stages", {})
            except json.JSONDecodeError:
                logger.warning("unreadable manifest, starting fresh")

    def _save_manifest(self):
        _dump_json(self.manifest_path, self.manifest)

    def run_stage(self, name: str, config_slice, inputs: list[Path],
                  outputs: list[Path], body) -> bool:
        """Returns True when the stage was skipped via the cache."""
        for p in inputs:
            _require(p, f"{name} input")
        key = _stage_key(name, config_slice,
                         [_sha256_file(p) for p in inputs])
        record = self.manifest["stages"].get(name)
        if record is not None and record["key"] == key:
            missing = [str(p) for p in outputs if not p.exists()]
            if not missing:
                actual = {str(p): _sha256_file(p) for p in outputs}
                if actual != record["outputs"]:
                    raise IntegrityError(
                        f"stage {name}: output hash mismatch on resume "
                        f"(outputs modified since last run)")
                print(f"[{name}] skipped (cached)")
                return True
        body()
        for p in outputs:
            if not p.exists():
                raise IntegrityError(f"stage {name} did not produce {p}")
        self.manifest["stages"][name] = {
            "key": key,
            "outputs": {str(p): _sha256_file(p) for p in outputs},
        }
        self._save_manifest()
        print(f"[{name}] done")
        return False


def _cmd_pipeline(cfg: ExperimentConfig, args) -> int:
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    pipe = _Pipeline(cfg, workdir)
    c = config_to_dict(cfg)

    targets = workdir / "targets.csv"
    clustered = workdir / "targets_clustered.csv"
    features = workdir / "features.csv"
    ranking_path = workdir / "ranking.json"
    model_path = workdir / "model.json"
    report_json = workdir / "report.json"
    report_text = workdir / "report.txt"

    def gen_body():
        ns = argparse.Namespace(out=str(targets))
        _cmd_generate(cfg, ns)

    pipe.run_stage("generate", {"scene": c["scene"], "seed": c["seed"]},
                   [], [targets], gen_body)

    def cluster_body():
        ns = argparse.Namespace(infile=str(targets), out=str(clustered))
        _cmd_cluster(cfg, ns)

    pipe.run_stage("cluster", {"dbscan": c["dbscan"]}, [targets],
                   [clustered], cluster_body)

    def extract_body():
        ns = argparse.Namespace(infile=str(clustered), out=str(features),
                                by="cluster")
        _cmd_extract(cfg, ns)

    pipe.run_stage("extract", {"by": "cluster"}, [clustered], [features],
                   extract_body)

    if args.with_select:
        def select_body():
            ns = argparse.Namespace(features=str(features),
                                    out=str(ranking_path),
                                    sweep_out=None, coarse_step=5,
                                    fine_step=1)
            _cmd_select(cfg, ns)

        pipe.run_stage("select",
                       {"forest": c["forest"], "seed": c["seed"]},
                       [features], [ranking_path], select_body)

    def train_body():
        ns = argparse.Namespace(features=str(features),
                                out=str(model_path), method=None)
        _cmd_train(cfg, ns)

    pipe.run_stage("train",
                   {"forest": c["forest"], "resample": c["resample"],
                    "method": c["method"], "features": c["features"],
                    "seed": c["seed"]},
                   [features], [model_path], train_body)

    def eval_body():
        ns = argparse.Namespace(features=str(features),
                                out_prefix=str(workdir / "report"),
                                baseline=None)
        _cmd_evaluate(cfg, ns)

    pipe.run_stage("evaluate",
                   {"cv": c["cv"], "forest": c["forest"],
                    "features": c["features"], "seed": c["seed"]},
                   [features], [report_json, report_text], eval_body)
    print(f"pipeline complete in {workdir}")
    return EXIT_OK


# -- argument wiring ---------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="radarclf",
                     description="radar road-user classification pipeline")
    parser.add_argument("--version", action="version",
                        version=f"radarclf {__version__}")
    parser.add_argument("--config", help="experiment config file "
                        "(plain text or JSON)")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--jobs", type=int, help="override worker count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled target CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("cluster", help="assign DBSCAN cluster ids")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract", help="window clusters and extract features")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--by", choices=("cluster", "object"), default="cluster",
                   help="group targets by DBSCAN cluster id or by "
                   "ground-truth object id")

    p = sub.add_parser("select", help="backward-eliminate a feature ranking")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep-out", dest="sweep_out")
    p.add_argument("--coarse-step", dest="coarse_step", type=int, default=5)
    p.add_argument("--fine-step", dest="fine_step", type=int, default=1)

    p = sub.add_parser("train", help="train a model bank on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", help="coupling method override")

    p = sub.add_parser("evaluate", help="cross-validated comparison report")
    p.add_argument("--features", required=True)
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    p.add_argument("--baseline", help="configuration name for deltas")

    p = sub.add_parser("predict", help="classify feature rows with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-tables", dest="dump_tables",
                   help="write per-sample probability tables as JSON lines")
    p.add_argument("--two-stage-thr", dest="two_stage_thr", type=float,
                   help="truck-vs-car override threshold")

    p = sub.add_parser("pipeline", help="run all stages, resumable")
    p.add_argument("--workdir", required=True)
    p.add_argument("--with-select", dest="with_select", action="store_true")
    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "cluster": _cmd_cluster,
    "extract": _cmd_extract,
    "select": _cmd_select,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        cfg = (load_config(args.config) if args.config
               else ExperimentConfig())
        if args.seed is not None:
            cfg = _override(cfg, seed=args.seed)
        if args.jobs is not None:
            cfg = _override(cfg, jobs=args.jobs)
        return _COMMANDS[args.command](cfg, args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, RegistryMismatch) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return ExperimentConfig(
        seed=kw.get("seed", cfg.seed), jobs=kw.get("jobs", cfg.jobs),
        method=cfg.method, features=cfg.features,
        two_stage_threshold=cfg.two_stage_threshold, dbscan=cfg.dbscan,
        resample=cfg.resample, forest=cfg.forest, cv=cfg.cv,
        scene=cfg.scene)


if __name__ == "__main__":
    sys.exit(main())
