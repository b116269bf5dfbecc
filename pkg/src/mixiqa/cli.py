"""Command-line entry point.

Subcommands: synth (generate a synthetic dataset tree), train, eval, check
(monotonicity + gradient verification), ablate (calibrator depth sweep).

Exit codes are a stable contract: 0 success, 2 configuration error, 3 data
error, 4 numeric failure, 5 property violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import TrainConfig, load_config, with_seed
from .data import load_all_manifests
from .errors import (
    ConfigError,
    DataError,
    MixiqaError,
    NumericError,
    PropertyViolationError,
)
from .metrics import report_as_table, report_to_jsonl
from .model import build_model
from .checkpoint import load_checkpoint, save_checkpoint
from .synth import default_synth_config, generate, load_synth_config, synth_config_to_json
from .train import (
    FeatureStore,
    ablate_depth,
    evaluate,
    make_splits,
    multi_split_eval,
    train,
    write_log,
)
from .verify import gradient_suite, model_suite, monotonicity_suite

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_PROPERTY = 5


def _load_train_config(path: str | None, seed: int | None) -> TrainConfig:
    cfg = load_config(path) if path else TrainConfig()
    return with_seed(cfg, seed)


def cmd_synth(args) -> int:
    cfg = load_synth_config(args.config) if args.config else default_synth_config()
    result = generate(cfg, args.out)
    with open(Path(args.out) / "generator_config.json", "w") as fh:
        json.dump(synth_config_to_json(cfg), fh, sort_keys=True, indent=2)
        fh.write("\n")
    for ds in sorted(result.manifests):
        m = result.manifests[ds]
        print(
            f"{ds}: {len(m)} samples, {len(m.content_ids)} contents, "
            f"native range [{m.native_min}, {m.native_max}], "
            f"higher_is_better={m.higher_is_better}"
        )
    return 0


def cmd_train(args) -> int:
    cfg = _load_train_config(args.config, args.seed)
    manifests = load_all_manifests(args.data)
    store = FeatureStore(args.data)
    splits = make_splits(manifests, cfg.seed)
    first = sorted(manifests)[0]
    channels = store.feature(manifests[first].records[0]).shape[0]
    model = build_model(
        channels,
        sorted(manifests),
        seed=cfg.seed,
        cfcl_depth=cfg.cfcl_depth,
        cfcl_widths=list(cfg.cfcl_widths) if cfg.cfcl_widths else None,
        head_h1=cfg.head_h1,
        head_h2=cfg.head_h2,
        normalize_pooled=cfg.normalize_pooled,
        allow_any_depth=cfg.allow_any_depth,
    )
    result = train(model, manifests, splits, cfg, args.data, store=store)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.model, cfg, out / "model.mqac")
    write_log(result.log, out / "train_log.jsonl")

    report = evaluate(result.model, manifests, splits, args.data, subset="val", store=store)
    print(f"best epoch {result.best_epoch} (validation weighted SRCC {result.best_val_srcc:+.4f})")
    print(report_as_table(report, title="validation report"))
    (out / "validation_report.jsonl").write_text(report_to_jsonl(report))
    return 0


def cmd_eval(args) -> int:
    model, cfg = load_checkpoint(args.checkpoint)
    manifests = load_all_manifests(args.data)
    store = FeatureStore(args.data)
    if args.splits == 1:
        splits = make_splits(manifests, cfg.seed)
        report = evaluate(model, manifests, splits, args.data, mode=args.mode, store=store)
        print(report_as_table(report, title=f"test report ({args.mode} mode)"))
        print(report_to_jsonl(report), end="")
        return 0
    median, all_reports = multi_split_eval(
        manifests, cfg, args.data, args.splits, mode=args.mode, store=store
    )
    print(report_as_table(median, title=f"median over {args.splits} splits ({args.mode} mode)"))
    print(report_to_jsonl(median), end="")
    for i, rep in enumerate(all_reports):
        print(f"# split {i}: weighted_srcc={rep.weighted_srcc:+.4f} weighted_plcc={rep.weighted_plcc:+.4f}")
    return 0


def cmd_check(args) -> int:
    failed = False
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
        report = model_suite(model, seed=args.seed)
        print(
            f"checkpoint calibrators: {report.checked} checked, "
            f"min gap {report.min_gap:.3e}, min input grad {report.min_grad:.3e}, "
            f"min weight {report.min_weight:.3e}"
        )
        for v in report.violations:
            print(f"VIOLATION [{v.kind}] depth={v.depth}: {v.detail}")
            print(f"  inputs={v.inputs} outputs={v.outputs}")
        failed |= not report.passed
    else:
        report = monotonicity_suite(n_transformers=args.random, seed=args.seed)
        print(
            f"monotonicity: {report.checked} random calibrators checked, "
            f"min gap {report.min_gap:.3e}, min input grad {report.min_grad:.3e}"
        )
        for v in report.violations:
            print(f"VIOLATION [{v.kind}] depth={v.depth} seed={v.seed}: {v.detail}")
            print(f"  inputs={v.inputs} outputs={v.outputs}")
        failed |= not report.passed

        grads = gradient_suite(seed=args.seed)
        print(
            f"gradients: {grads.cases} cases, max rel err {grads.max_rel_err:.3e} "
            f"(worst: {grads.worst_case})"
        )
        if grads.max_rel_err > 1e-4:
            print(f"VIOLATION [gradient] finite differences disagree: {grads.worst_case}")
            failed = True

    if failed:
        raise PropertyViolationError("verification suite found violations (see report above)")
    print("all checks passed")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_train_config(args.config, args.seed)
    depths = tuple(int(d) for d in args.depths.split(","))
    for d in depths:
        replace(cfg, cfcl_depth=d).validate()
    manifests = load_all_manifests(args.data)
    store = FeatureStore(args.data)
    splits = make_splits(manifests, cfg.seed)
    rows = ablate_depth(manifests, splits, cfg, args.data, depths=depths, store=store)
    datasets = sorted(manifests)
    header = ["depth"] + datasets + ["weighted"]
    print("  ".join(h.rjust(10) for h in header))
    for depth, report in rows:
        cells = [str(depth).rjust(10)]
        for ds in datasets:
            cells.append(f"{report.per_dataset[ds].srcc:+.4f}".rjust(10))
        cells.append(f"{report.weighted_srcc:+.4f}".rjust(10))
        print("  ".join(cells))
    for depth, report in rows:
        row = {"depth": depth, "weighted_srcc": report.weighted_srcc,
               "weighted_plcc": report.weighted_plcc,
               "per_dataset": {ds: report.per_dataset[ds].srcc for ds in datasets}}
        print(json.dumps(row, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixiqa",
        description="Mixed-dataset image quality model: train, evaluate, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic heterogeneous dataset tree")
    p.add_argument("--config", help="generator config JSON (default: built-in 3-dataset config)")
    p.add_argument("--out", required=True, help="output data root")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on every dataset under the data root")
    p.add_argument("--config", help="training config JSON (default: built-in defaults)")
    p.add_argument("--data", required=True, help="data root with one directory per dataset")
    p.add_argument("--out", required=True, help="output directory for checkpoint and logs")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (or medians over fresh splits)")
    p.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    p.add_argument("--data", required=True, help="data root")
    p.add_argument("--splits", type=int, default=1,
                   help="with N > 1, retrain per split and report medians (default 1)")
    p.add_argument("--mode", choices=("raw", "calibrated"), default="raw",
                   help="correlate shared-scale scores (raw) or calibrated scores (default raw)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="verify monotonicity and gradients")
    p.add_argument("--checkpoint", help="check the calibrators of this checkpoint")
    p.add_argument("--random", type=int, default=1000,
                   help="number of random calibrators per depth (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="suite seed (default 0)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("ablate", help="depth ablation over the calibrator stack")
    p.add_argument("--config", help="training config JSON (default: built-in defaults)")
    p.add_argument("--data", required=True, help="data root")
    p.add_argument("--depths", default="3,5,7", help="comma-separated depths (default 3,5,7)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except PropertyViolationError as e:
        print(f"property violation: {e}", file=sys.stderr)
        return EXIT_PROPERTY
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except MixiqaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
