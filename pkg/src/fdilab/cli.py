"""Command-line front end.

Subcommands: generate (datasets), gridsearch (hyperparameters), select
(standalone feature selection), benchmark (the full matrix), report
(pretty-print a results CSV).

Configuration comes from defaults, then an optional flat `key = value` file
(--config), then flags; later layers win. Every run writes the resolved
configuration to a manifest so it can be reproduced. Exit codes: 0 success,
1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys as _sys
from pathlib import Path

from . import attack, bench, featsel, powergrid
from .classify import AnnConfig, KnnConfig, SvmConfig
from .powergrid import NoiseModel
from .featsel import BcsParams, BpsoParams, GaParams


class ConfigError(Exception):
    """Bad user-supplied configuration; reported with exit code 1."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage problems; the contract here is 1
    def error(self, message):
        raise _UsageError(message)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# every known config key: name -> (caster, default)
_DEFAULT_SPEC = bench.ExperimentSpec()
CONFIG_KEYS = {
    "systems": (_parse_list, _DEFAULT_SPEC.systems),
    "fs": (_parse_list, _DEFAULT_SPEC.fs_methods),
    "classifier": (_parse_list, _DEFAULT_SPEC.classifiers),
    "n_train": (int, _DEFAULT_SPEC.n_train),
    "n_test": (int, _DEFAULT_SPEC.n_test),
    "seed": (int, _DEFAULT_SPEC.seed),
    "noise_sigma": (float, _DEFAULT_SPEC.noise_sigma),
    "load_var": (float, _DEFAULT_SPEC.load_var),
    "attack_ratio": (float, _DEFAULT_SPEC.attack_ratio),
    "max_targets": (int, _DEFAULT_SPEC.max_targets),
    "magnitude_low": (float, _DEFAULT_SPEC.magnitude_low),
    "magnitude_high": (float, _DEFAULT_SPEC.magnitude_high),
    "standardize": (_parse_bool, _DEFAULT_SPEC.standardize),
    "svm_c": (float, _DEFAULT_SPEC.svm.C),
    "svm_gamma": (float, _DEFAULT_SPEC.svm.gamma),
    "svm_tol": (float, _DEFAULT_SPEC.svm.tol),
    "svm_max_passes": (int, _DEFAULT_SPEC.svm.max_passes),
    "svm_max_sweeps": (int, _DEFAULT_SPEC.svm.max_sweeps),
    "knn_k": (int, _DEFAULT_SPEC.knn.k),
    "ann_alpha": (float, _DEFAULT_SPEC.ann.alpha),
    "ann_epochs": (int, _DEFAULT_SPEC.ann.epochs),
    "ann_batch": (int, _DEFAULT_SPEC.ann.batch),
    "ann_seed": (int, _DEFAULT_SPEC.ann.seed),
    "bcs_alpha": (float, _DEFAULT_SPEC.bcs.alpha),
    "bcs_pa": (float, _DEFAULT_SPEC.bcs.pa),
    "bcs_lambda": (float, _DEFAULT_SPEC.bcs.lam),
    "bcs_population": (int, _DEFAULT_SPEC.bcs.population),
    "bcs_iterations": (int, _DEFAULT_SPEC.bcs.iterations),
    "bpso_c1": (float, _DEFAULT_SPEC.bpso.c1),
    "bpso_c2": (float, _DEFAULT_SPEC.bpso.c2),
    "bpso_w": (float, _DEFAULT_SPEC.bpso.w),
    "bpso_vmax": (float, _DEFAULT_SPEC.bpso.v_max),
    "bpso_population": (int, _DEFAULT_SPEC.bpso.population),
    "bpso_iterations": (int, _DEFAULT_SPEC.bpso.iterations),
    "ga_mutation_rate": (float, _DEFAULT_SPEC.ga.mutation_rate),
    "ga_population": (int, _DEFAULT_SPEC.ga.population),
    "ga_iterations": (int, _DEFAULT_SPEC.ga.iterations),
    "ga_tournament": (int, _DEFAULT_SPEC.ga.tournament),
    "ga_elite": (int, _DEFAULT_SPEC.ga.elite),
    "wrapper_k": (int, _DEFAULT_SPEC.wrapper_k),
    "val_fraction": (float, _DEFAULT_SPEC.val_fraction),
    "threads": (int, _DEFAULT_SPEC.threads),
    "holdout": (float, 0.2),
    "case": (str, ""),
    "n": (int, 1000),
    "out_dir": (str, "runs"),
}


def _read_config_file(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path} line {lineno}: unknown key {key!r}")
        caster, _default = CONFIG_KEYS[key]
        try:
            out[key] = caster(val.strip())
        except ValueError as exc:
            raise ConfigError(f"{path} line {lineno}: {exc}") from None
    return out


def _resolve(args) -> dict:
    """defaults <- config file <- explicit flags."""
    cfg = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        cfg.update(_read_config_file(Path(args.config)))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            caster, _default = CONFIG_KEYS[key]
            cfg[key] = caster(val) if isinstance(val, str) else val
    return cfg


def _experiment_spec(cfg: dict) -> bench.ExperimentSpec:
    try:
        return bench.ExperimentSpec(
            systems=tuple(cfg["systems"]),
            fs_methods=tuple(cfg["fs"]),
            classifiers=tuple(cfg["classifier"]),
            n_train=cfg["n_train"], n_test=cfg["n_test"], seed=cfg["seed"],
            noise_sigma=cfg["noise_sigma"], load_var=cfg["load_var"],
            attack_ratio=cfg["attack_ratio"], max_targets=cfg["max_targets"],
            magnitude_low=cfg["magnitude_low"], magnitude_high=cfg["magnitude_high"],
            standardize=cfg["standardize"],
            svm=SvmConfig(C=cfg["svm_c"], gamma=cfg["svm_gamma"], tol=cfg["svm_tol"],
                          max_passes=cfg["svm_max_passes"], max_sweeps=cfg["svm_max_sweeps"]),
            knn=KnnConfig(k=cfg["knn_k"]),
            ann=AnnConfig(alpha=cfg["ann_alpha"], epochs=cfg["ann_epochs"],
                          batch=cfg["ann_batch"], seed=cfg["ann_seed"]),
            bcs=BcsParams(alpha=cfg["bcs_alpha"], pa=cfg["bcs_pa"], lam=cfg["bcs_lambda"],
                          population=cfg["bcs_population"], iterations=cfg["bcs_iterations"]),
            bpso=BpsoParams(c1=cfg["bpso_c1"], c2=cfg["bpso_c2"], w=cfg["bpso_w"],
                            v_max=cfg["bpso_vmax"], population=cfg["bpso_population"],
                            iterations=cfg["bpso_iterations"]),
            ga=GaParams(mutation_rate=cfg["ga_mutation_rate"], population=cfg["ga_population"],
                        iterations=cfg["ga_iterations"], tournament=cfg["ga_tournament"],
                        elite=cfg["ga_elite"]),
            wrapper_k=cfg["wrapper_k"], val_fraction=cfg["val_fraction"],
            threads=cfg["threads"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None


def _validate_choices(cfg: dict) -> None:
    for fs in cfg["fs"]:
        if fs not in ("none", "bcs", "bpso", "ga"):
            raise ConfigError(f"unknown FS method {fs!r} (use none, bcs, bpso, ga)")
    for kind in cfg["classifier"]:
        if kind not in ("svm", "knn", "ann"):
            raise ConfigError(f"unknown classifier {kind!r} (use svm, knn, ann)")


def _resolve_case(cfg: dict) -> powergrid.BusSystem:
    name = cfg["case"]
    if not name:
        raise ConfigError("--case is required")
    path = Path(name)
    if path.suffix == ".csv":
        if not path.exists():
            raise ConfigError(f"case file not found: {path}")
        return powergrid.load_case(path)
    try:
        return powergrid.load_builtin(name)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_lines(cfg: dict, include=None) -> list:
    keys = sorted(include if include is not None else CONFIG_KEYS)
    lines = []
    for key in keys:
        val = cfg[key]
        if isinstance(val, tuple):
            val = ",".join(val)
        lines.append(f"{key} = {val}")
    return lines


def _write_manifest(cfg: dict, out: Path, name: str = "manifest.txt") -> Path:
    path = out / name
    path.write_text("\n".join(_manifest_lines(cfg)) + "\n")
    return path


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    cfg = _resolve(args)
    sys_ = _resolve_case(cfg)
    out = _out_dir(cfg)
    try:
        noise = NoiseModel(cfg["noise_sigma"])
        atk_cfg = None
        if cfg["max_targets"]:
            atk_cfg = attack.AttackConfig(cfg["max_targets"], cfg["magnitude_low"],
                                          cfg["magnitude_high"])
        ds = attack.generate_dataset(sys_, cfg["n"], cfg["attack_ratio"], noise,
                                     cfg["load_var"], atk_cfg, cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dest = Path(args.out) if args.out else out / f"{sys_.name}_n{cfg['n']}_seed{cfg['seed']}.csv"
    attack.save_dataset(ds, dest)
    n_attacked = int(ds.y.sum())
    print(f"wrote {dest} ({ds.n_samples} samples, {ds.n_features} features, "
          f"{n_attacked} attacked / {ds.n_samples - n_attacked} clean)")
    return 0


def cmd_gridsearch(args) -> int:
    cfg = _resolve(args)
    kinds = cfg["classifier"]
    _validate_choices(cfg)
    ds = _load_dataset_arg(args)
    out = _out_dir(cfg)
    cache_path = out / "gridsearch_cache.json"
    cache = json.loads(cache_path.read_text()) if cache_path.exists() else {}
    for kind in kinds:
        spec = bench.GridSearchSpec(classifier=kind, grid=bench.default_grid(kind),
                                    holdout=cfg["holdout"], seed=cfg["seed"],
                                    standardize=cfg["standardize"])
        res = bench.grid_search(ds.X, ds.y, spec, cache=cache)
        grid_csv = out / f"grid_{kind}.csv"
        with grid_csv.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config", "accuracy", "error"])
            for config, acc, err in res.rows:
                writer.writerow([repr(config), "" if acc is None else repr(acc), err or ""])
        best_path = out / f"best_{kind}.txt"
        with best_path.open("w") as fh:
            fh.write(f"classifier = {kind}\n")
            for fld, val in dataclasses.asdict(res.best_config).items():
                fh.write(f"{fld} = {val}\n")
            fh.write(f"holdout_accuracy = {res.best_accuracy!r}\n")
        print(f"{kind}: best {res.best_config} holdout accuracy {res.best_accuracy:.4f} "
              f"({res.from_cache} of {len(res.rows)} cells from cache)")
    cache_path.write_text(json.dumps(cache, indent=0, sort_keys=True))
    return 0


def cmd_select(args) -> int:
    cfg = _resolve(args)
    _validate_choices(cfg)
    methods = [m for m in cfg["fs"] if m != "none"]
    if not methods:
        raise ConfigError("nothing to do: --fs selects no search method")
    ds = _load_dataset_arg(args)
    out = _out_dir(cfg)
    labels = _row_labels_for(ds)
    spec = _experiment_spec(cfg)
    for method in methods:
        ctx = featsel.make_fitness_context(
            ds.X, ds.y, classifier="knn", config=KnnConfig(k=cfg["wrapper_k"]),
            val_fraction=cfg["val_fraction"],
            seed=bench.subseed(cfg["seed"], ds.meta.get("system", "dataset"), "wrapper-split"),
            standardize=cfg["standardize"])
        res = featsel.run_search(method, ctx, spec.fs_params(method),
                                 bench.subseed(cfg["seed"], ds.meta.get("system", "dataset"),
                                               method, "search"))
        txt, trace = featsel.export_fs_result(res, labels, out / f"fs_{method}")
        print(f"{method}: {res.n_selected}/{ds.n_features} features, "
              f"fitness {res.best_fitness:.4f}, {res.evaluations} evaluations -> {txt}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _resolve(args)
    _validate_choices(cfg)
    spec = _experiment_spec(cfg)
    for system in spec.systems:
        _check_system(system)
    out = _out_dir(cfg)
    _write_manifest(cfg, out)
    # wall_time_s varies between runs, so reruns of an identical configuration
    # reuse the stored rows; this is what makes rerun outputs byte-identical
    key_lines = _manifest_lines(cfg, include=[k for k in CONFIG_KEYS
                                              if k not in ("out_dir", "threads", "case", "n")])
    spec_hash = hashlib.sha256("\n".join(key_lines).encode()).hexdigest()[:16]
    cache_path = out / f"rows_{spec_hash}.csv"
    if cache_path.exists():
        results = bench.load_results(cache_path)
        print(f"(reusing cached rows {cache_path})")
    else:
        fs_log = {}
        results = bench.run_matrix(spec, fs_log=fs_log)
        for (system, method), (fs_res, seconds) in sorted(fs_log.items()):
            jac = powergrid.build_jacobian(_load_system(system))
            stem = Path(system).stem if system.endswith(".csv") else system
            txt, _trace = featsel.export_fs_result(fs_res, jac.row_labels,
                                                   out / f"fs_{stem}_{method}")
            with Path(txt).open("a") as fh:
                fh.write(f"search_seconds = {seconds:.3f}\n")
        bench.export_results(results, cache_path)
    results_path = out / "results.csv"
    results_path.write_bytes(cache_path.read_bytes())
    report = bench.render_report(results)
    (out / "report.txt").write_text(report)
    print(report, end="")
    print(f"results: {results_path}")
    return 0


def cmd_report(args) -> int:
    results = bench.load_results(Path(args.results))
    print(bench.render_report(results), end="")
    return 0


def _load_dataset_arg(args):
    path = Path(args.dataset)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    return attack.load_dataset(path)


def _check_system(name: str) -> None:
    path = Path(name)
    if path.suffix == ".csv":
        if not path.exists():
            raise ConfigError(f"case file not found: {path}")
        return
    try:
        powergrid.builtin_case_path(name)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def _load_system(name: str):
    path = Path(name)
    if path.suffix == ".csv" and path.exists():
        return powergrid.load_case(path)
    return powergrid.load_builtin(name)


def _row_labels_for(ds) -> list:
    system = ds.meta.get("system", "")
    try:
        jac = powergrid.build_jacobian(_load_system(str(system)))
        if len(jac.row_labels) == ds.n_features:
            return list(jac.row_labels)
    except (FileNotFoundError, ValueError):
        pass
    return [f"f{j + 1}" for j in range(ds.n_features)]


# -------------------------------------------------------------------- parser

def _add_common(sub):
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out-dir", dest="out_dir")
    sub.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    sub.add_argument("--load-var", dest="load_var", type=float)
    sub.add_argument("--attack-ratio", dest="attack_ratio", type=float)
    sub.add_argument("--standardize", dest="standardize")


def build_parser() -> _Parser:
    parser = _Parser(prog="fdilab",
                     description="Stealthy false-data-injection benchmark on DC state estimation")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="simulate a labeled dataset")
    _add_common(gen)
    gen.add_argument("--case", help="bundled case name (ieee14/ieee57/ieee118) or case CSV path")
    gen.add_argument("--n", type=int, help="number of samples")
    gen.add_argument("--max-targets", dest="max_targets", type=int)
    gen.add_argument("--out", help="dataset CSV destination")
    gen.set_defaults(func=cmd_generate)

    gs = subs.add_parser("gridsearch", help="hyperparameter search on a dataset")
    _add_common(gs)
    gs.add_argument("--dataset", required=True, help="dataset CSV from `generate`")
    gs.add_argument("--classifier", help="comma list: svm,knn,ann")
    gs.add_argument("--holdout", type=float)
    gs.set_defaults(func=cmd_gridsearch)

    sel = subs.add_parser("select", help="run feature selection on a dataset")
    _add_common(sel)
    sel.add_argument("--dataset", required=True)
    sel.add_argument("--fs", help="comma list: bcs,bpso,ga")
    sel.add_argument("--wrapper-k", dest="wrapper_k", type=int)
    sel.set_defaults(func=cmd_select)

    bm = subs.add_parser("benchmark", help="full FS x classifier x system matrix")
    _add_common(bm)
    bm.add_argument("--systems", help="comma list of case names/paths")
    bm.add_argument("--fs", help="comma list incl. none")
    bm.add_argument("--classifier", help="comma list: svm,knn,ann")
    bm.add_argument("--n-train", dest="n_train", type=int)
    bm.add_argument("--n-test", dest="n_test", type=int)
    bm.add_argument("--threads", type=int)
    bm.set_defaults(func=cmd_benchmark)

    rep = subs.add_parser("report", help="render a results CSV as tables")
    rep.add_argument("--results", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"fdilab: {exc}", file=_sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fdilab: {exc}", file=_sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract
        print(f"fdilab: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
