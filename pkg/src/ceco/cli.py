"""Command-line surface: frame tools, feature-dump analysis, gradient
checks, and experiment drivers.

Exit statuses: 0 success, 1 check failure, 2 bad input, 3 I/O error,
4 insufficient data, 5 divergence. All randomness is seeded via flags, so
every subcommand is deterministic given its arguments. Option precedence:
explicit flags override --config file values, which override defaults.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import gradcheck, io
from .data import SceneConfig, gen_scene
from .etf import load_frame, make_etf, save_frame, verify_etf
from .exceptions import CecoError, InsufficientClassesError
from .metrics import FeatureBatch, nc_report
from .training import (
    DEFAULT_LAMBDA_GRID,
    TrainConfig,
    lambda_sweep,
    run_ablation_grid,
    train,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_IO = 3
EXIT_INSUFFICIENT = 4
EXIT_DIVERGED = 5

# TrainConfig/SceneConfig knobs settable via flags or a --config file.
_SCENE_KEYS = ("height", "width", "K", "beta", "input_dim", "blob_count",
               "noise_sigma", "smooth_radius", "palette_seed")
_TRAIN_KEYS = ("hidden_dim", "feature_dim", "lam", "alpha", "pr_classifier_mode",
               "center_classifier_mode", "lr", "weight_decay", "iterations",
               "eval_every", "seed", "n_train_scenes", "n_eval_scenes",
               "lr_schedule", "poly_power")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, IOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InsufficientClassesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (CecoError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceco",
        description="Center-collapse regularization lab: ETF frames, "
                    "collapse metrics, and imbalanced-segmentation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-etf", help="construct a simplex ETF frame file")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_etf)

    p = sub.add_parser("verify-etf", help="check a frame file against the ETF identity")
    p.add_argument("--frame", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify_etf)

    p = sub.add_parser("analyze", help="collapse report for a feature dump")
    p.add_argument("--features", required=True)
    p.add_argument("--classifier", default=None, help="optional frame file for classifier metrics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("gen-data", help="generate a synthetic scene as a feature dump")
    _add_scene_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", default=None, help="optional config key/value sidecar file")
    p.set_defaults(func=cmd_gen_data)

    for name, helptext, fn in (
        ("train", "run one training experiment, log JSONL records", cmd_train),
        ("ablation", "run the five classifier variants, write a CSV table", cmd_ablation),
        ("sweep", "run the loss-weight sweep, write a CSV table", cmd_sweep),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="JSON config file (flags override it)")
        _add_scene_flags(p)
        _add_train_flags(p)
        p.add_argument("--out", required=True)
        if name != "train":
            p.add_argument("--jobs", type=int, default=1)
        if name == "sweep":
            p.add_argument("--lambdas", type=float, nargs="+", default=None)
        p.set_defaults(func=fn)
    return parser


def _add_scene_flags(p):
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--classes", dest="K", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--input-dim", dest="input_dim", type=int, default=None)
    p.add_argument("--blobs", dest="blob_count", type=int, default=None)
    p.add_argument("--noise", dest="noise_sigma", type=float, default=None)
    p.add_argument("--smooth", dest="smooth_radius", type=int, default=None)
    p.add_argument("--palette-seed", dest="palette_seed", type=int, default=None)


def _add_train_flags(p):
    p.add_argument("--hidden", dest="hidden_dim", type=int, default=None)
    p.add_argument("--dim", dest="feature_dim", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--pr-mode", dest="pr_classifier_mode", choices=("learned", "fixed_etf"), default=None)
    p.add_argument("--cc-mode", dest="center_classifier_mode",
                   choices=("fixed_etf", "learned", "off"), default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--eval-every", dest="eval_every", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-scenes", dest="n_train_scenes", type=int, default=None)
    p.add_argument("--eval-scenes", dest="n_eval_scenes", type=int, default=None)
    p.add_argument("--schedule", dest="lr_schedule", choices=("constant", "poly"), default=None)


def cmd_make_etf(args) -> int:
    if args.classes < 2 or args.dim < args.classes:
        print(f"error: need dim >= classes >= 2, got dim={args.dim} classes={args.classes}",
              file=sys.stderr)
        return EXIT_BAD_INPUT
    frame = make_etf(args.dim, args.classes, args.alpha, args.seed)
    save_frame(frame, args.out)
    print(f"wrote {args.dim}x{args.classes} frame (alpha={io.fmt(args.alpha)}) to {args.out}")
    return EXIT_OK


def cmd_verify_etf(args) -> int:
    frame = load_frame(args.frame)
    report = verify_etf(frame.matrix, args.tol)
    print(json.dumps({
        "max_norm_deviation": report.max_norm_deviation,
        "max_offdiag_deviation": report.max_offdiag_deviation,
        "max_pairwise_cosine": report.max_pairwise_cosine,
        "is_etf": report.is_etf,
    }, sort_keys=True))
    return EXIT_OK if report.is_etf else EXIT_CHECK_FAILED


def cmd_analyze(args) -> int:
    features, labels, K = io.read_feature_dump(args.features)
    classifier = load_frame(args.classifier).matrix if args.classifier else None
    batch = FeatureBatch(features=features, labels=labels, K=K)
    report = nc_report(batch, classifier)
    io.write_json(args.out, report.to_dict())
    print(f"analyzed {features.shape[0]} rows, {report.n_classes_used} classes used; "
          f"equiang_std={io.fmt(report.equiang_std_centers)} "
          f"maxangle_avg={io.fmt(report.maxangle_avg_centers)}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    results = gradcheck.run_all(args.trials, args.seed)
    ok = True
    for suite, worst in results.items():
        status = "pass" if worst <= gradcheck.TOL else "FAIL"
        ok = ok and worst <= gradcheck.TOL
        print(f"{status} {suite}: worst relative error {io.fmt(worst)}")
    if not ok:
        print(f"gradient check failed (seed {args.seed})", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _scene_config(_merged(args, config_file=None))
    scene = gen_scene(cfg)
    io.write_feature_dump(args.out, scene.inputs, scene.labels, scene.K)
    if args.sidecar:
        io.write_kv_block(args.sidecar, cfg.to_mapping())
    realized = scene.pixel_counts.max() / scene.pixel_counts[scene.pixel_counts > 0].min()
    print(f"wrote {scene.height * scene.width} pixels, K={scene.K}, "
          f"realized imbalance factor {io.fmt(float(realized))}")
    return EXIT_OK


def _merged(args, config_file) -> dict:
    merged = {}
    if config_file:
        with open(config_file, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(_SCENE_KEYS) - set(_TRAIN_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in _SCENE_KEYS + _TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _scene_config(merged: dict) -> SceneConfig:
    kwargs = {k: merged[k] for k in _SCENE_KEYS if k in merged}
    if "seed" in merged:
        kwargs["seed"] = merged["seed"]
    return SceneConfig(**kwargs)


def _train_config(args) -> TrainConfig:
    merged = _merged(args, getattr(args, "config", None))
    scene_kwargs = {k: merged.pop(k) for k in list(merged) if k in _SCENE_KEYS}
    return TrainConfig(scene=SceneConfig(**scene_kwargs), **merged)


def _print_summary(label: str, final: dict) -> None:
    print(f"{label}: accuracy={io.fmt(final['accuracy'])} "
          f"tail={io.fmt(final['tail_accuracy'])} "
          f"equiang_std={io.fmt(final['equiang_std_centers'])} "
          f"maxangle_avg={io.fmt(final['maxangle_avg_centers'])} "
          f"self_duality={io.fmt(final['self_duality_gap'])}")


def cmd_train(args) -> int:
    cfg = _train_config(args)
    log = train(cfg)
    io.write_jsonl(args.out, log.records)
    _print_summary("final", log.final)
    if log.diverged:
        print("error: training diverged; partial log retained", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


_TABLE_METRICS = ("accuracy", "head_accuracy", "common_accuracy", "tail_accuracy",
                  "equiang_std_centers", "maxangle_avg_centers", "self_duality_gap")


def cmd_ablation(args) -> int:
    cfg = _train_config(args)
    rows = run_ablation_grid(cfg, jobs=args.jobs)
    header = ["pr_mode", "cc_mode", "lam"] + list(_TABLE_METRICS)
    io.write_csv(args.out, header, [[r[h] for h in header] for r in rows])
    if any(r["diverged"] for r in rows):
        print("error: at least one arm diverged; partial table retained", file=sys.stderr)
        return EXIT_DIVERGED
    for r in rows:
        _print_summary(f"{r['pr_mode']}/{r['cc_mode']}", r)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _train_config(args)
    lambdas = args.lambdas if args.lambdas is not None else list(DEFAULT_LAMBDA_GRID)
    rows = lambda_sweep(cfg, lambdas, jobs=args.jobs)
    header = ["lam"] + list(_TABLE_METRICS)
    io.write_csv(args.out, header, [[r[h] for h in header] for r in rows])
    if any(r["diverged"] for r in rows):
        print("error: at least one arm diverged; partial table retained", file=sys.stderr)
        return EXIT_DIVERGED
    for r in rows:
        _print_summary(f"lambda={io.fmt(r['lam'])}", r)
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
