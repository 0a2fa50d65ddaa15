"""Experiment harness: hyperparameter grid search, the feature-selection by
classifier by system matrix, detector threshold calibration, and result
export/reporting.

Everything is reproducible from one master seed. Sub-seeds for datasets and
searches are derived by hashing string tokens, so adding systems or methods
never shifts the randomness of the others, and worker-pool scheduling cannot
affect results.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attack, classify, featsel, powergrid
from .attack import NoiseModel, generate_dataset
from .classify import AnnConfig, KnnConfig, SvmConfig
from .featsel import BcsParams, BpsoParams, GaParams
from .powergrid import BusSystem


def subseed(master: int, *tokens) -> int:
    """Stable 63-bit seed derived from the master seed and string tokens."""
    text = "|".join([str(int(master))] + [str(t) for t in tokens])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def dataset_fingerprint(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X).tobytes())
    h.update(np.ascontiguousarray(y).tobytes())
    return h.hexdigest()


# --------------------------------------------------------------- grid search

@dataclass(frozen=True)
class GridSearchSpec:
    classifier: str
    grid: tuple
    holdout: float = 0.2
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ValueError("grid must be non-empty")
        if not 0.0 < self.holdout < 1.0:
            raise ValueError("holdout must be in (0, 1)")


@dataclass(frozen=True)
class GridSearchResult:
    best_config: object
    best_accuracy: float
    rows: tuple          # (config, accuracy or None, error or None) per grid point
    from_cache: int = 0


def default_grid(classifier: str) -> tuple:
    """Grids spanning the usual winning region for each classifier family."""
    if classifier == "svm":
        return tuple(SvmConfig(C=c, gamma=g)
                     for c in (1.0, 10.0, 100.0, 1000.0, 10000.0)
                     for g in (1e-5, 1e-4, 1e-3, 1e-2, 1e-1))
    if classifier == "knn":
        return tuple(KnnConfig(k=k) for k in range(1, 21))
    if classifier == "ann":
        return tuple(AnnConfig(alpha=a) for a in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1))
    raise ValueError(f"unknown classifier {classifier!r}")


def grid_search(X, y, spec: GridSearchSpec, cache: dict | None = None) -> GridSearchResult:
    """Evaluate every grid point on a stratified holdout; argmax wins.

    Ties go to the earliest grid point. `cache` maps
    (dataset fingerprint, config repr) -> accuracy and is updated in place,
    which lets callers persist results across runs.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    tr, va = classify.stratified_split(y, spec.holdout, spec.seed)
    fp = dataset_fingerprint(X, y) + f"|{spec.holdout}|{spec.seed}|{spec.standardize}"
    rows = []
    best_idx = None
    best_acc = -1.0
    hits = 0
    for idx, cfg in enumerate(spec.grid):
        key = f"{fp}||{cfg!r}"
        acc = None
        err = None
        if cache is not None and key in cache:
            acc = cache[key]
            hits += 1
        else:
            try:
                model = classify.train_model(X[tr], y[tr], spec.classifier, cfg,
                                             standardize=spec.standardize)
                acc = classify.accuracy(classify.predict(model, X[va]), y[va])
                if cache is not None:
                    cache[key] = acc
            except (ValueError, FloatingPointError) as exc:
                err = str(exc)
        rows.append((cfg, acc, err))
        if acc is not None and acc > best_acc:
            best_acc = acc
            best_idx = idx
    if best_idx is None:
        raise ValueError("every grid point failed")
    return GridSearchResult(best_config=spec.grid[best_idx], best_accuracy=best_acc,
                            rows=tuple(rows), from_cache=hits)


# ------------------------------------------------------- threshold calibration

def calibrate_threshold(sys: BusSystem, noise: NoiseModel = NoiseModel(),
                        n_samples: int = 500, quantile: float = 0.95,
                        seed: int = 0, load_var: float = 0.1) -> float:
    """Empirical quantile of clean-sample WLS residuals as the detector threshold."""
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must be in (0, 1)")
    ds = generate_dataset(sys, n_samples, 0.0, noise, load_var, None, seed)
    jac = powergrid.build_jacobian(sys)
    res = attack.batch_residuals(ds.X, jac, noise.sigma ** 2)
    return float(np.quantile(res, quantile))


# ------------------------------------------------------------- the experiment

@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved configuration of one benchmark run."""

    systems: tuple = ("ieee14",)
    fs_methods: tuple = ("none", "bcs", "bpso", "ga")
    classifiers: tuple = ("svm", "knn", "ann")
    n_train: int = 2000
    n_test: int = 500
    seed: int = 0
    noise_sigma: float = 0.01
    load_var: float = 0.1
    attack_ratio: float = 0.5
    max_targets: int = 0          # 0 = per-system default, ceil(n_states / 3)
    magnitude_low: float = 0.01
    magnitude_high: float = 0.1
    standardize: bool = True
    svm: SvmConfig = SvmConfig()
    knn: KnnConfig = KnnConfig()
    ann: AnnConfig = AnnConfig()
    bcs: BcsParams = BcsParams()
    bpso: BpsoParams = BpsoParams()
    ga: GaParams = GaParams()
    wrapper_k: int = 12
    val_fraction: float = 0.2
    threads: int = 1

    def classifier_config(self, kind: str):
        return {"svm": self.svm, "knn": self.knn, "ann": self.ann}[kind]

    def fs_params(self, method: str):
        return {"bcs": self.bcs, "bpso": self.bpso, "ga": self.ga}[method]


@dataclass(frozen=True)
class ExperimentResult:
    system: str
    fs_method: str
    classifier: str
    n_features: int
    accuracy: float
    wall_time_s: float
    seed: int


def _resolve_system(name: str) -> BusSystem:
    path = Path(name)
    if path.suffix == ".csv" and path.exists():
        return powergrid.load_case(path)
    return powergrid.load_builtin(name)


def _experiment_datasets(spec: ExperimentSpec, sys: BusSystem):
    noise = NoiseModel(spec.noise_sigma)
    max_targets = spec.max_targets or math.ceil(sys.n_states / 3)
    cfg = attack.AttackConfig(max_targets, spec.magnitude_low, spec.magnitude_high)
    train = generate_dataset(sys, spec.n_train, spec.attack_ratio, noise,
                             spec.load_var, cfg, subseed(spec.seed, sys.name, "train"))
    test = generate_dataset(sys, spec.n_test, spec.attack_ratio, noise,
                            spec.load_var, cfg, subseed(spec.seed, sys.name, "test"))
    return train, test


def _fs_job(spec: ExperimentSpec, system: str):
    """One (system, fs ...) unit: select features once, then score every classifier."""
    sys = _resolve_system(system)
    train, test = _experiment_datasets(spec, sys)
    out_rows = {}
    fs_runs = {}
    ctx = featsel.make_fitness_context(
        train.X, train.y, classifier="knn", config=KnnConfig(k=spec.wrapper_k),
        val_fraction=spec.val_fraction, seed=subseed(spec.seed, system, "wrapper-split"),
        standardize=spec.standardize)
    for fs in spec.fs_methods:
        if fs == "none":
            mask = np.ones(train.n_features, dtype=bool)
        else:
            # the mask cache in ctx is shared across methods on purpose:
            # fitness is a pure function of the mask, so this only saves refits
            t0 = time.perf_counter()
            fs_res = featsel.run_search(fs, ctx, spec.fs_params(fs),
                                        subseed(spec.seed, system, fs, "search"))
            fs_runs[(system, fs)] = (fs_res, time.perf_counter() - t0)
            mask = np.asarray(fs_res.best_mask, dtype=bool)
        n_features = int(mask.sum())
        for kind in spec.classifiers:
            t0 = time.perf_counter()
            model = classify.train_model(train.X, train.y, kind,
                                         spec.classifier_config(kind),
                                         mask=mask, standardize=spec.standardize)
            acc = classify.accuracy(classify.predict(model, test.X), test.y)
            wall = time.perf_counter() - t0
            out_rows[(system, fs, kind)] = ExperimentResult(
                system=system, fs_method=fs, classifier=kind, n_features=n_features,
                accuracy=acc, wall_time_s=wall, seed=spec.seed)
    return out_rows, fs_runs


def run_matrix(spec: ExperimentSpec, fs_log: dict | None = None) -> list:
    """Run the full systems x FS x classifiers grid.

    Feature selection runs once per (system, FS method) and its mask is shared
    by all classifiers, mirroring a select-then-retrain protocol. Jobs are
    independent per system; `threads` (or FDI_LAB_THREADS) bounds the pool.
    fs_log, when given, collects {(system, fs): (FsResult, seconds)}.
    """
    threads = int(os.environ.get("FDI_LAB_THREADS", spec.threads))
    rows = {}
    if threads > 1 and len(spec.systems) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_fs_job, spec, s): s for s in spec.systems}
            for fut in futures:
                out_rows, fs_runs = fut.result()
                rows.update(out_rows)
                if fs_log is not None:
                    fs_log.update(fs_runs)
    else:
        for system in spec.systems:
            out_rows, fs_runs = _fs_job(spec, system)
            rows.update(out_rows)
            if fs_log is not None:
                fs_log.update(fs_runs)
    ordered = []
    for system in spec.systems:
        for fs in spec.fs_methods:
            for kind in spec.classifiers:
                ordered.append(rows[(system, fs, kind)])
    return ordered


# ----------------------------------------------------------- export / report

RESULTS_HEADER = "system,fs_method,classifier,n_features,accuracy,wall_time_s,seed"


def export_results(results, path) -> Path:
    """Write the results CSV; identical results give identical bytes."""
    if not results:
        raise ValueError("no results to export")
    path = Path(path)
    with path.open("w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in results:
            fh.write(f"{r.system},{r.fs_method},{r.classifier},{r.n_features},"
                     f"{r.accuracy!r},{r.wall_time_s:.3f},{r.seed}\n")
    return path


def load_results(path) -> list:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ValueError(f"{path}: not a results CSV")
    out = []
    for line in lines[1:]:
        sysname, fs, kind, nf, acc, wall, seed = line.split(",")
        out.append(ExperimentResult(system=sysname, fs_method=fs, classifier=kind,
                                    n_features=int(nf), accuracy=float(acc),
                                    wall_time_s=float(wall), seed=int(seed)))
    return out


def render_report(results) -> str:
    """Per-system table: one row per FS method, one accuracy column per classifier."""
    if not results:
        raise ValueError("no results to report")
    systems = []
    for r in results:
        if r.system not in systems:
            systems.append(r.system)
    classifiers = []
    for r in results:
        if r.classifier not in classifiers:
            classifiers.append(r.classifier)
    lines = []
    for system in systems:
        sys_rows = [r for r in results if r.system == system]
        fs_order = []
        for r in sys_rows:
            if r.fs_method not in fs_order:
                fs_order.append(r.fs_method)
        lines.append(f"=== {system} (seed {sys_rows[0].seed}) ===")
        header = f"{'FS':<8}{'features':>9}" + "".join(f"{c.upper():>10}" for c in classifiers)
        lines.append(header)
        for fs in fs_order:
            cells = {r.classifier: r for r in sys_rows if r.fs_method == fs}
            nf = next(iter(cells.values())).n_features
            row = f"{fs:<8}{nf:>9}"
            for c in classifiers:
                row += f"{cells[c].accuracy:>10.4f}" if c in cells else f"{'-':>10}"
            lines.append(row)
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
