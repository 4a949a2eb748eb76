"""Command-line front end.

Subcommands: run (cross-validated experiment), predict (score a CSV
with saved artifacts), stats (rank/compare published error tables),
folds (export/import split plans). Settings come from a JSON config
file; command-line flags override file values, which override built-in
defaults. Exit codes: 0 success, 1 usage or configuration, 2 data, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from . import evaluation as ev
from .dataset import CsvSchema, export_folds, import_folds, load_csv, resolve_data_path, \
    stratified_kfold
from .errors import ConfigError, DataError, NumericalError
from .finetune import FtIvConfig
from .frc import classify_batch, load_rulebase, rules_to_text, save_rulebase
from .mf import PreprocSpec, load_expert_file, preprocess_array
from .network import AEConfig, forward, network_from_dict, network_to_dict
from .optim import CmaesConfig, OptimizerConfig
from .seeding import spawn_seed
from .serialize import dump_document, load_document

MODEL_FORMAT = "aefrc-model"
MODEL_VERSION = 1

DEFAULT_CONFIG = {
    "dataset": {"path": None, "label": "label", "delimiter": ",", "header": True},
    "architecture": None,
    "strategy": "ft1",
    "rho": 0.1,
    "sweep": False,
    "rho_grid": list(ev.RHO_GRID_DEFAULT),
    "ae": {"beta_sparse": 3.0, "weight_decay": 1e-4, "denoise_snr_db": 10.0},
    "optimizer": {"max_iters": 400, "tol": 1e-6, "history": 10},
    "cmaes": {"sigma0": None, "population": None, "max_evals": 2000, "tol_fitness": None},
    "ft4": {"beta_sep": 1.0, "zeta": 0.05,
            "beta_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            "c_abs_cap": 10.0},
    "target_stat": None,
    "match_mode": "product",
    "ft3_inner_iters": 100,
    "expert_file": None,
    "expert_dont_care": "zeros",
    "cv": {"k": 10, "seed": 0, "fold_file": None},
    "jobs": 1,
    "output_dir": "aefrc-out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(doc) - set(DEFAULT_CONFIG))
    if unknown:
        raise ConfigError([f"unknown config key '{k}'" for k in unknown])
    return doc


def _validate_run_config(cfg: dict) -> list[str]:
    problems = []
    if not cfg["dataset"].get("path"):
        problems.append("dataset.path is required")
    arch = cfg.get("architecture")
    if not arch or not isinstance(arch, (list, tuple)) \
            or any(not isinstance(h, int) or h < 1 for h in arch):
        problems.append("architecture must be a non-empty list of positive hidden widths")
    if cfg["strategy"] not in ev.STRATEGIES:
        problems.append(f"strategy must be one of {ev.STRATEGIES}, not '{cfg['strategy']}'")
    if not (isinstance(cfg["rho"], (int, float)) and 0.0 < cfg["rho"] < 1.0):
        problems.append("rho must lie strictly between 0 and 1")
    if cfg["sweep"]:
        grid = cfg["rho_grid"]
        if not grid or any(not 0.0 < r < 1.0 for r in grid):
            problems.append("rho_grid must be a non-empty list of values in (0, 1)")
    if cfg["match_mode"] not in ("product", "sum"):
        problems.append("match_mode must be 'product' or 'sum'")
    if cfg["target_stat"] not in (None, "median", "mean"):
        problems.append("target_stat must be null, 'median', or 'mean'")
    if cfg["expert_dont_care"] not in ("zeros", "uniform"):
        problems.append("expert_dont_care must be 'zeros' or 'uniform'")
    if not isinstance(cfg["cv"]["k"], int) or cfg["cv"]["k"] < 2:
        problems.append("cv.k must be an integer of at least 2")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        problems.append("jobs must be a positive integer")
    if not isinstance(cfg["ft3_inner_iters"], int) or cfg["ft3_inner_iters"] < 1:
        problems.append("ft3_inner_iters must be a positive integer")
    opt = cfg["optimizer"]
    if opt["max_iters"] < 1 or not opt["tol"] > 0 or opt["history"] < 1:
        problems.append("optimizer needs positive max_iters, tol, and history")
    if cfg["cmaes"]["max_evals"] < 1:
        problems.append("cmaes.max_evals must be positive")
    return problems


def _pipeline_config(cfg: dict, expert) -> ev.PipelineConfig:
    ae = cfg["ae"]
    opt = cfg["optimizer"]
    cm = cfg["cmaes"]
    f4 = cfg["ft4"]
    return ev.PipelineConfig(
        hidden_sizes=tuple(cfg["architecture"]),
        ae=AEConfig(rho=float(cfg["rho"]), beta_sparse=float(ae["beta_sparse"]),
                    weight_decay=float(ae["weight_decay"]),
                    denoise_snr_db=None if ae["denoise_snr_db"] is None
                    else float(ae["denoise_snr_db"])),
        strategy=cfg["strategy"],
        opt=OptimizerConfig(max_iters=int(opt["max_iters"]), tol=float(opt["tol"]),
                            history=int(opt["history"])),
        cmaes=CmaesConfig(sigma0=None if cm["sigma0"] is None else float(cm["sigma0"]),
                          population=None if cm["population"] is None else int(cm["population"]),
                          max_evals=int(cm["max_evals"]),
                          tol_fitness=None if cm["tol_fitness"] is None
                          else float(cm["tol_fitness"])),
        ft4=FtIvConfig(beta_sep=float(f4["beta_sep"]), zeta=float(f4["zeta"]),
                       beta_grid=tuple(float(b) for b in f4["beta_grid"]),
                       c_abs_cap=float(f4["c_abs_cap"])),
        target_stat=cfg["target_stat"],
        match_mode=cfg["match_mode"],
        ft3_inner_iters=int(cfg["ft3_inner_iters"]),
        expert=expert,
        expert_dont_care=cfg["expert_dont_care"],
    )


def _schema(block: dict) -> CsvSchema:
    label = block.get("label", "label")
    return CsvSchema(label=label, delimiter=block.get("delimiter", ","),
                     header=bool(block.get("header", True)))


def save_model(path: str, preproc: PreprocSpec, net, label_names) -> None:
    dump_document({
        "label_names": list(label_names),
        "preproc": preproc.to_dict(),
        "network": network_to_dict(net),
    }, path, MODEL_FORMAT, MODEL_VERSION)


def load_model(path: str):
    doc = load_document(path, MODEL_FORMAT, MODEL_VERSION)
    try:
        return (PreprocSpec.from_dict(doc["preproc"]),
                network_from_dict(doc["network"]),
                tuple(doc["label_names"]))
    except KeyError as exc:
        raise DataError(f"{path}: model bundle lacks section {exc}") from exc


def cmd_run(args) -> int:
    cfg = DEFAULT_CONFIG
    if args.config:
        cfg = _merge(cfg, _load_config_file(args.config))
    overrides: dict = {}
    if args.dataset:
        overrides.setdefault("dataset", {})["path"] = args.dataset
    if args.label is not None:
        overrides.setdefault("dataset", {})["label"] = args.label
    if args.architecture:
        overrides["architecture"] = [int(h) for h in args.architecture.split(",")]
    if args.strategy:
        overrides["strategy"] = args.strategy
    if args.rho is not None:
        overrides["rho"] = args.rho
    if args.sweep is not None:
        overrides["sweep"] = args.sweep
    if args.k is not None:
        overrides.setdefault("cv", {})["k"] = args.k
    if args.seed is not None:
        overrides.setdefault("cv", {})["seed"] = args.seed
    if args.fold_file:
        overrides.setdefault("cv", {})["fold_file"] = args.fold_file
    if args.expert_file:
        overrides["expert_file"] = args.expert_file
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    cfg = _merge(cfg, overrides)

    problems = _validate_run_config(cfg)
    if problems:
        raise ConfigError(problems)

    path = resolve_data_path(cfg["dataset"]["path"])
    ds = load_csv(path, _schema(cfg["dataset"]))
    expert = load_expert_file(cfg["expert_file"]) if cfg["expert_file"] else None
    pipeline_cfg = _pipeline_config(cfg, expert)

    seed = int(cfg["cv"]["seed"])
    k = int(cfg["cv"]["k"])
    if cfg["cv"]["fold_file"]:
        plan = import_folds(cfg["cv"]["fold_file"], ds.sample_count)
    else:
        plan = stratified_kfold(ds, k, spawn_seed(seed, "plan"))

    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)

    if cfg["sweep"]:
        sweep = ev.sweep_rho(ds, pipeline_cfg, tuple(cfg["rho_grid"]),
                             k=k, seed=seed, plan=plan, jobs=int(cfg["jobs"]))
        report = sweep.best
        summary = {
            "best_rho": sweep.best_rho,
            "cells": {f"{rho:g}": {"mean_accuracy": r.mean_accuracy,
                                   "std_accuracy": r.std_accuracy,
                                   "mean_rule_count": r.mean_rule_count,
                                   "valid_folds": r.valid_folds}
                      for rho, r in sweep.reports.items()},
        }
        dump_document(summary, os.path.join(out_dir, "sweep.json"), "aefrc-sweep", 1)
        print(f"sweep over rho {cfg['rho_grid']}: best rho {sweep.best_rho:g}")
    else:
        report = ev.run_cv(ds, pipeline_cfg, k=k, seed=seed, plan=plan,
                           jobs=int(cfg["jobs"]))

    if report.valid_folds == 0:
        raise NumericalError(
            "every fold failed: " + "; ".join(f.error or "?" for f in report.folds))

    ev.save_report(report, os.path.join(out_dir, "report.json"))
    export_folds(plan, os.path.join(out_dir, "folds.txt"))

    best_fold = max((f for f in report.folds if f.ok and f.pipeline is not None),
                    key=lambda f: (f.accuracy, -f.fold))
    fp = best_fold.pipeline
    save_model(os.path.join(out_dir, "model.json"), fp.preproc, fp.net, fp.label_names)
    save_rulebase(fp.rulebase, os.path.join(out_dir, "rules.json"))
    with open(os.path.join(out_dir, "rules.txt"), "w", encoding="utf-8") as fh:
        fh.write(rules_to_text(fp.rulebase, fp.label_names))

    echo = _merge(cfg, {"rho": report.rho, "sweep": False,
                        "cv": {"fold_file": os.path.join(out_dir, "folds.txt")}})
    with open(os.path.join(out_dir, "run_echo.json"), "w", encoding="utf-8") as fh:
        json.dump(echo, fh, indent=1)

    print(f"dataset: {path} ({ds.sample_count} samples, {ds.feature_count} features, "
          f"{ds.class_count} classes)")
    print(f"strategy {cfg['strategy']}, architecture {cfg['architecture']}, "
          f"rho {report.rho:g}, k {report.k}, seed {seed}")
    print(f"accuracy {100 * report.mean_accuracy:.2f} +/- {100 * report.std_accuracy:.2f} %"
          f" over {report.valid_folds}/{report.k} folds, "
          f"mean rules {report.mean_rule_count:.1f}")
    for f in report.folds:
        if not f.ok:
            print(f"  fold {f.fold} failed: {f.error}")
    print(f"artifacts in {out_dir}: report.json, model.json, rules.json, rules.txt, "
          f"folds.txt, run_echo.json")
    return 0


def _read_feature_rows(path: str, delimiter: str, header: bool,
                       label: str | int | None):
    """Feature matrix for prediction; an optional label column is dropped."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter)
                    if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read input {path}: {exc}") from exc
    rows = [r for r in rows if not r[0].lstrip().startswith("@")]
    start = 0
    label_col = None
    if header and rows:
        head = [c.strip() for c in rows[0]]
        start = 1
        if isinstance(label, str) and label in head:
            label_col = head.index(label)
    if isinstance(label, int):
        label_col = label
    data = []
    for i, row in enumerate(rows[start:], start=start + 1):
        fields = [c.strip() for c in row]
        if label_col is not None:
            if not 0 <= label_col < len(fields):
                raise DataError(f"{path} line {i}: label column {label_col} out of range")
            fields = fields[:label_col] + fields[label_col + 1:]
        try:
            data.append([float(c) for c in fields])
        except ValueError as exc:
            raise DataError(f"{path} line {i}: {exc}") from exc
    if not data:
        return np.zeros((0, 0))
    width = len(data[0])
    if any(len(r) != width for r in data):
        raise DataError(f"{path}: ragged rows in input")
    return np.array(data, dtype=float)


def cmd_predict(args) -> int:
    preproc, net, label_names = load_model(args.model)
    rb = load_rulebase(args.rules)
    label = args.label
    if label is not None and label.isdigit():
        label = int(label)
    X = _read_feature_rows(args.input, args.delimiter, not args.no_header, label)
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["row", "prediction"]
                        + [f"score_{name}" for name in label_names] + ["tie"])
        if X.shape[0]:
            if X.shape[1] != preproc.feature_count:
                raise DataError(
                    f"input has {X.shape[1]} feature columns, model expects "
                    f"{preproc.feature_count}")
            Xp = preprocess_array(X, preproc)
            H = forward(net, Xp)[-1]
            labels, scores, ties = classify_batch(rb, H)
            for i in range(X.shape[0]):
                writer.writerow([i, label_names[labels[i] - 1]]
                                + [format(s, ".6g") for s in scores[i]]
                                + [int(ties[i])])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_stats(args) -> int:
    rt = ev.load_rank_table(args.table)
    control = args.control or rt.methods[-1]
    if control not in rt.methods:
        raise DataError(f"control method '{control}' is not in the table {rt.methods}")

    name_w = max(len(d) for d in rt.datasets + ("dataset",))
    print("ranks (lower error ranks first):")
    print("  " + "dataset".ljust(name_w) + "  " + "  ".join(f"{m:>10}" for m in rt.methods))
    for i, d in enumerate(rt.datasets):
        cells = ["        NA" if not np.isfinite(r) else f"{r:>10.2f}" for r in rt.ranks[i]]
        print("  " + d.ljust(name_w) + "  " + "  ".join(cells))
    print("  " + "rank sum".ljust(name_w) + "  "
          + "  ".join(f"{s:>10.2f}" for s in rt.rank_sums))
    print("  " + "avg rank".ljust(name_w) + "  "
          + "  ".join(f"{a:>10.2f}" for a in rt.average_ranks))

    fr = ev.friedman(rt)
    print(f"friedman chi-square {fr.chi2:.4f} with {fr.df} degrees of freedom "
          f"over {fr.n_datasets} datasets")
    cd = ev.bonferroni_dunn_cd(len(rt.methods), len(rt.datasets),
                               q_alpha=args.q, alpha=args.alpha)
    print(f"critical difference at alpha={args.alpha:g}: {cd:.3f}")

    ci = rt.methods.index(control)
    for j, m in enumerate(rt.methods):
        if j == ci:
            continue
        st = ev.wilcoxon_sign(rt.errors[:, ci], rt.errors[:, j], alpha=args.alpha)
        verdict = "significant" if st.significant else "not significant"
        print(f"sign test {control} vs {m}: {st.wins_a} wins, {st.wins_b} losses, "
              f"{st.ties} ties over {st.n} (cutoff {st.cutoff}, {verdict})")
    return 0


def cmd_folds(args) -> int:
    schema = CsvSchema(label=int(args.label) if args.label.isdigit() else args.label,
                       delimiter=args.delimiter, header=not args.no_header)
    ds = load_csv(resolve_data_path(args.dataset), schema)
    if args.action == "export":
        plan = stratified_kfold(ds, args.k, spawn_seed(args.seed, "plan"),
                                best_effort=args.best_effort)
        export_folds(plan, args.out)
        sizes = np.bincount(plan.assignment, minlength=plan.k)
        print(f"wrote {args.out}: {plan.k} folds over {plan.sample_count} samples, "
              f"sizes {sizes.tolist()}")
    else:
        plan = import_folds(args.file, ds.sample_count)
        sizes = np.bincount(plan.assignment, minlength=plan.k)
        print(f"{args.file}: {plan.k} folds over {plan.sample_count} samples, "
              f"sizes {sizes.tolist()}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="aefrc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="cross-validated training and evaluation")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--dataset", help="dataset CSV path")
    run.add_argument("--label", help="label column name or index")
    run.add_argument("--architecture", help="comma-separated hidden widths, e.g. 5,3")
    run.add_argument("--strategy", choices=ev.STRATEGIES)
    run.add_argument("--rho", type=float, help="sparsity target")
    run.add_argument("--sweep", dest="sweep", action="store_true", default=None,
                     help="sweep rho over rho_grid")
    run.add_argument("--no-sweep", dest="sweep", action="store_false")
    run.add_argument("--k", type=int, help="fold count")
    run.add_argument("--seed", type=int, help="root seed")
    run.add_argument("--fold-file", help="reuse an exported fold plan")
    run.add_argument("--expert-file", help="expert knowledge JSON")
    run.add_argument("--jobs", type=int, help="parallel fold workers")
    run.add_argument("--output-dir")
    run.set_defaults(func=cmd_run)

    pred = sub.add_parser("predict", help="classify rows with saved artifacts")
    pred.add_argument("--model", required=True)
    pred.add_argument("--rules", required=True)
    pred.add_argument("--input", required=True, help="CSV of feature rows")
    pred.add_argument("--label", help="label column (dropped if present)")
    pred.add_argument("--delimiter", default=",")
    pred.add_argument("--no-header", action="store_true")
    pred.add_argument("--out", help="output CSV (default stdout)")
    pred.set_defaults(func=cmd_predict)

    stats = sub.add_parser("stats", help="rank table statistics")
    stats.add_argument("table", help="CSV error matrix, methods as columns, NA allowed")
    stats.add_argument("--alpha", type=float, default=0.05)
    stats.add_argument("--control", help="control method (default: last column)")
    stats.add_argument("--q", type=float, default=None,
                       help="explicit critical value, bypasses the table")
    stats.set_defaults(func=cmd_stats)

    folds = sub.add_parser("folds", help="export or import fold plans")
    fsub = folds.add_subparsers(dest="action", required=True)
    fexp = fsub.add_parser("export")
    fexp.add_argument("--dataset", required=True)
    fexp.add_argument("--label", default="label")
    fexp.add_argument("--delimiter", default=",")
    fexp.add_argument("--no-header", action="store_true")
    fexp.add_argument("--k", type=int, required=True)
    fexp.add_argument("--seed", type=int, default=0)
    fexp.add_argument("--best-effort", action="store_true")
    fexp.add_argument("--out", required=True)
    fexp.set_defaults(func=cmd_folds)
    fimp = fsub.add_parser("import")
    fimp.add_argument("--dataset", required=True)
    fimp.add_argument("--label", default="label")
    fimp.add_argument("--delimiter", default=",")
    fimp.add_argument("--no-header", action="store_true")
    fimp.add_argument("--file", required=True)
    fimp.set_defaults(func=cmd_folds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.violations:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
