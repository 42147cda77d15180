"""Command line front end.

One subcommand per pipeline stage plus `run` for whole config-driven
experiments and `plot` for ternary heatmaps.  Flags that take a seed
default to the SOUPKIT_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import (
    BLUR_HALF_WIDTH,
    CONTRAST_SCALE,
    CORRUPTION_KINDS,
    NOISE_SIGMA,
    PIXELATE_BLOCK,
    corrupt,
    gen_patterns,
    load_dataset,
    save_dataset,
)
from .errors import SoupkitError, Unsupported
from .evaluator import (
    DEFAULT_K,
    DEFAULT_TEMPERATURE,
    embed_dataset,
    head_accuracy,
    knn_accuracy,
    loo_knn_accuracy,
)
from .experiment import (
    ExperimentConfig,
    apply_overrides,
    canonical_json,
    metrics_csv_text,
    run_experiment,
)
from .mixer import (
    MixtureWeights,
    SimplexGridSpec,
    barycentric_centroid_grid,
    interpolation_path,
    mix,
)
from .reports import pair_sweep_report
from .souping import (
    SeasonConfig,
    SelfSeasonConfig,
    greedy_soup,
    season_random,
    self_season,
)
from .ssl_objectives import ALGORITHMS, SSLConfig, inter_train
from .tensor_store import CheckpointMeta, load_checkpoint, save_checkpoint
from .ternary_svg import render_ternary_svg, simplex_rows_from_metrics
from .toy_models import TrainConfig, train_supervised


def _default_seed() -> int:
    raw = os.environ.get("SOUPKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise Unsupported(f"SOUPKIT_SEED must be an integer, got {raw!r}") from None


def _seed_of(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--seed", type=int, default=None, help="default: $SOUPKIT_SEED, then 0"
    )


def _add_scorer(p: argparse.ArgumentParser, with_refs: bool = True) -> None:
    p.add_argument("--scorer", choices=("knn", "head"), default="knn")
    if with_refs:
        p.add_argument("--refs", help="labeled reference dataset for knn scoring")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)


def _load_params(path: str):
    params, _meta = load_checkpoint(path)
    return params


def _load_many(paths) -> list:
    return [_load_params(p) for p in paths]


def _scorer_fn(args, queries_ds):
    """(params) -> metric value on queries_ds, and the metric name."""
    if args.scorer == "head":
        return "head_accuracy", lambda params: head_accuracy(params, queries_ds)
    if not getattr(args, "refs", None):
        raise Unsupported("knn scoring needs --refs")
    refs = load_dataset(args.refs)
    return "knn_accuracy", lambda params: knn_accuracy(
        params, refs, queries_ds, k=args.k, temperature=args.temperature
    )


def _selection_fn(args):
    """Scalar selection score: --select split if given, else leave-one-out
    over --refs."""
    if args.scorer == "head":
        ds = load_dataset(args.select if args.select else args.refs)
        return lambda params: head_accuracy(params, ds)
    if not args.refs:
        raise Unsupported("knn scoring needs --refs")
    refs = load_dataset(args.refs)
    if args.select:
        queries = load_dataset(args.select)
        return lambda params: knn_accuracy(
            params, refs, queries, k=args.k, temperature=args.temperature
        )
    return lambda params: loo_knn_accuracy(
        embed_dataset(params, refs),
        refs.labels,
        refs.num_classes,
        k=args.k,
        temperature=args.temperature,
    )


def _write_json(path: str | Path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# data commands


def cmd_gen_data(args) -> int:
    ds = gen_patterns(
        num_classes=args.classes,
        num_samples=args.samples,
        side=args.side,
        seed=_seed_of(args),
        noise_sigma=args.noise_sigma,
        max_shift=args.max_shift,
        split=args.split,
    )
    save_dataset(args.out, ds)
    print(f"wrote {args.out}: {ds.n} samples, {ds.input_dim} dims, {ds.num_classes} classes")
    return 0


def cmd_corrupt(args) -> int:
    if args.list:
        print("kind           severities 1..5")
        print(f"gaussian_noise sigma {NOISE_SIGMA}")
        print(f"box_blur       half width {BLUR_HALF_WIDTH}")
        print(f"contrast       scale {CONTRAST_SCALE}")
        print(f"pixelate       block {PIXELATE_BLOCK}")
        return 0
    if not (args.data and args.kind and args.out):
        raise Unsupported("corrupt needs --data, --kind, and --out (or --list)")
    ds = load_dataset(args.data)
    out = corrupt(ds, args.kind, args.severity, seed=_seed_of(args))
    save_dataset(args.out, out)
    print(f"wrote {args.out}: {args.kind} severity {args.severity}")
    return 0


# ---------------------------------------------------------------------------
# training commands


def _steps_or_epochs(args) -> dict:
    out = {}
    if args.steps is not None:
        out["steps"] = args.steps
    if args.epochs is not None:
        out["epochs"] = args.epochs
    return out


def cmd_train(args) -> int:
    stock = _load_params(args.stock)
    data = load_dataset(args.data)
    cfg = TrainConfig(
        **_steps_or_epochs(args),
        batch_size=args.batch_size,
        peak_lr=args.peak_lr,
        warmup_frac=args.warmup_frac,
        weight_decay=args.weight_decay,
        lpft=args.lpft,
        lpft_steps=args.lpft_steps,
        lpft_lr=args.lpft_lr,
        seed=_seed_of(args),
    )
    params = train_supervised(stock, data, cfg)
    save_checkpoint(
        args.out,
        params,
        CheckpointMeta(
            role="fine_tuned", lineage=[Path(args.stock).stem], seed=cfg.seed
        ),
    )
    print(f"wrote {args.out}")
    return 0


def cmd_inter_train(args) -> int:
    stock = _load_params(args.stock)
    data = load_dataset(args.data)
    cfg = SSLConfig(
        algorithm=args.algorithm,
        **_steps_or_epochs(args),
        batch_size=args.batch_size,
        peak_lr=args.peak_lr,
        warmup_frac=args.warmup_frac,
        weight_decay=args.weight_decay,
        seed=_seed_of(args),
        mask_ratio=args.mask_ratio,
        temperature=args.temperature,
        aug_noise_sigma=args.aug_noise_sigma,
        aug_mask_frac=args.aug_mask_frac,
        variance_target=args.variance_target,
        local_views=args.local_views,
        local_frac=args.local_frac,
        proj_hidden=args.proj_hidden,
        proj_dim=args.proj_dim,
    )
    params = inter_train(stock, data, cfg)
    save_checkpoint(
        args.out,
        params,
        CheckpointMeta(
            role="inter_trained",
            lineage=[Path(args.stock).stem],
            seed=cfg.seed,
            hyperparams={"algorithm": args.algorithm},
        ),
    )
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# mixing commands


def _parse_weights(text: str) -> np.ndarray:
    return np.array([float(part) for part in text.split(",")])


def cmd_mix(args) -> int:
    ingredients = _load_many(args.ckpt)
    weights = MixtureWeights(_parse_weights(args.weights))
    soup = mix(ingredients, weights)
    save_checkpoint(
        args.out,
        soup,
        CheckpointMeta(
            role="soup",
            lineage=[Path(p).stem for p in args.ckpt],
            hyperparams={"weights": canonical_json([float(w) for w in weights.w])},
        ),
    )
    print(f"wrote {args.out}")
    return 0


def cmd_greedy(args) -> int:
    ingredients = _load_many(args.ckpt)
    soup, result = greedy_soup(ingredients, _selection_fn(args))
    save_checkpoint(
        args.out,
        soup,
        CheckpointMeta(
            role="soup",
            lineage=[Path(p).stem for p in args.ckpt],
            hyperparams={"pool": canonical_json(list(result.pool))},
        ),
    )
    if args.report:
        _write_json(
            args.report,
            {
                "pool": list(result.pool),
                "order": list(result.order),
                "individual_scores": list(result.individual_scores),
                "final_score": result.final_score,
            },
        )
    print(
        f"wrote {args.out}: pool {list(result.pool)}, score {result.final_score:.6f}"
    )
    return 0


def cmd_season(args) -> int:
    ingredients = _load_many(args.ckpt)
    data = load_dataset(args.data)
    cfg = SeasonConfig(
        trials=args.trials,
        k=args.k,
        temperature=args.temperature,
        score=args.score,
        seed=_seed_of(args),
    )
    soup, result = season_random(ingredients, data, cfg)
    save_checkpoint(
        args.out,
        soup,
        CheckpointMeta(
            role="soup",
            lineage=[Path(p).stem for p in args.ckpt],
            seed=cfg.seed,
            hyperparams={
                "weights": canonical_json([float(w) for w in result.best_weights.w])
            },
        ),
    )
    if args.report:
        _write_json(
            args.report,
            {
                "weights": [float(w) for w in result.best_weights.w],
                "scores": list(result.trial_scores),
                "best_trial": result.best_trial,
                "best_score": result.best_score,
                "seed": cfg.seed,
            },
        )
    print(f"wrote {args.out}: best trial {result.best_trial}, score {result.best_score:.6f}")
    return 0


def cmd_self_season(args) -> int:
    ingredients = _load_many(args.ckpt)
    data = load_dataset(args.data)
    cfg = SelfSeasonConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        peak_lr=args.peak_lr,
        final_lr=args.final_lr,
        k=args.k,
        temperature=args.temperature,
        fd_step=args.fd_step,
        optimizer=args.optimizer,
        seed=_seed_of(args),
    )
    soup, result = self_season(ingredients, data, cfg)
    save_checkpoint(
        args.out,
        soup,
        CheckpointMeta(
            role="soup",
            lineage=[Path(p).stem for p in args.ckpt],
            seed=cfg.seed,
            hyperparams={
                "weights": canonical_json([float(w) for w in result.weights.w])
            },
        ),
    )
    if args.report:
        _write_json(
            args.report,
            {
                "weights": [float(w) for w in result.weights.w],
                "logits": list(result.logits),
                "entropy_by_epoch": list(result.entropy_by_epoch),
                "seed": cfg.seed,
            },
        )
    entropy = result.entropy_by_epoch[-1]
    print(f"wrote {args.out}: final entropy {entropy:.6f}")
    return 0


# ---------------------------------------------------------------------------
# sweeps and evaluation


def _queries_with_names(paths):
    out = []
    for i, path in enumerate(paths):
        ds = load_dataset(path)
        out.append((getattr(ds, "split", "") or f"query_{i}", ds))
    return out


def cmd_sweep_pair(args) -> int:
    a, b = _load_params(args.a), _load_params(args.b)
    if args.num_points < 2:
        raise Unsupported("need at least the two endpoints")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lambdas = [i / (args.num_points - 1) for i in range(args.num_points)]
    models = interpolation_path(a, b, lambdas)
    rows = []
    queries = _queries_with_names(args.queries)
    for split, ds in queries:
        metric, fn = _scorer_fn(args, ds)
        for i, (lam, model) in enumerate(zip(lambdas, models)):
            rows.append((f"lambda_{i}", [1.0 - lam, lam], split, metric, fn(model)))
    rows.sort(key=lambda r: (int(r[0].split("_")[1]), r[2]))
    (out_dir / "metrics.csv").write_text(metrics_csv_text(rows), encoding="utf-8")
    for split, _ds in queries:
        lams = [r[1][1] for r in rows if r[2] == split]
        vals = [r[4] for r in rows if r[2] == split]
        csv_text, summary = pair_sweep_report(lams, vals, slack=args.slack)
        (out_dir / f"lmc_{split}.csv").write_text(csv_text, encoding="utf-8")
        _write_json(out_dir / f"lmc_{split}.json", summary)
        print(f"{split}: lmc_holds={summary['lmc_holds']} barrier={summary['barrier']:.6f}")
    return 0


def cmd_sweep_simplex(args) -> int:
    ingredients = _load_many(args.ckpt)
    if len(ingredients) != 3:
        raise Unsupported(f"simplex sweep needs exactly 3 checkpoints, got {len(ingredients)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mixtures = []
    for i in range(3):
        weights = np.zeros(3)
        weights[i] = 1.0
        mixtures.append((f"corner_{i}", weights, ingredients[i]))
    grid = barycentric_centroid_grid(SimplexGridSpec(3, args.resolution))
    for i, w in enumerate(grid):
        mixtures.append((f"cell_{i}", w.w, mix(ingredients, w)))
    rows = []
    for split, ds in _queries_with_names(args.queries):
        metric, fn = _scorer_fn(args, ds)
        for mixture_id, weights, model in mixtures:
            rows.append((mixture_id, list(weights), split, metric, fn(model)))
    order = {m[0]: i for i, m in enumerate(mixtures)}
    rows.sort(key=lambda r: (order[r[0]], r[2]))
    (out_dir / "metrics.csv").write_text(metrics_csv_text(rows), encoding="utf-8")
    best = max(rows, key=lambda r: r[4])
    print(f"wrote {out_dir / 'metrics.csv'}: best {best[0]} = {best[4]:.6f}")
    return 0


def cmd_eval(args) -> int:
    params = _load_params(args.ckpt)
    results = []
    for split, ds in _queries_with_names(args.queries):
        metric, fn = _scorer_fn(args, ds)
        value = fn(params)
        results.append({"split": split, "metric": metric, "value": value})
        print(f"{split} {metric} {value!r}")
    if args.out:
        _write_json(args.out, results)
    return 0


# ---------------------------------------------------------------------------
# experiments and plots


def cmd_run(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.set:
        raw = apply_overrides(raw, args.set)
    if args.out_dir:
        raw["out_dir"] = args.out_dir
    if args.seed is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw:
        raw["seed"] = _default_seed()
    cfg = ExperimentConfig.from_dict(raw)
    manifest = run_experiment(cfg, workers=args.workers)
    print(
        f"wrote {Path(cfg.out_dir) / manifest.metrics_path}: "
        f"{len(manifest.rows)} rows, {len(manifest.checkpoints)} checkpoints"
    )
    return 0


def cmd_plot(args) -> int:
    rows = simplex_rows_from_metrics(args.metrics, args.split)
    labels = tuple(args.labels.split(",")) if args.labels else ("ingredient 0", "ingredient 1", "ingredient 2")
    if len(labels) != 3:
        raise Unsupported("--labels needs exactly 3 comma separated names")
    svg = render_ternary_svg(rows, labels=labels, title=args.title)
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soupkit", description="Train, mix, and evaluate toy ingredient models."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a pattern classification dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--max-shift", type=int, default=None)
    p.add_argument("--split", default="train")
    _add_seed(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("corrupt", help="apply a corruption to a dataset")
    p.add_argument("--list", action="store_true", help="print kinds and severity tables")
    p.add_argument("--data")
    p.add_argument("--kind", choices=CORRUPTION_KINDS)
    p.add_argument("--severity", type=int, default=3)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="supervised fine-tuning from a stock model")
    p.add_argument("--stock", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--peak-lr", type=float, default=1e-3)
    p.add_argument("--warmup-frac", type=float, default=0.1)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--lpft", action="store_true")
    p.add_argument("--lpft-steps", type=int, default=200)
    p.add_argument("--lpft-lr", type=float, default=1e-2)
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inter-train", help="self-supervised inter-training")
    p.add_argument("--stock", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--peak-lr", type=float, default=1e-3)
    p.add_argument("--warmup-frac", type=float, default=0.1)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--mask-ratio", type=float, default=0.75)
    p.add_argument("--temperature", type=float, default=0.1)
    p.add_argument("--aug-noise-sigma", type=float, default=None)
    p.add_argument("--aug-mask-frac", type=float, default=0.25)
    p.add_argument("--variance-target", type=float, default=1.0)
    p.add_argument("--local-views", action="store_true")
    p.add_argument("--local-frac", type=float, default=0.5)
    p.add_argument("--proj-hidden", type=int, default=32)
    p.add_argument("--proj-dim", type=int, default=16)
    _add_seed(p)
    p.set_defaults(func=cmd_inter_train)

    p = sub.add_parser("mix", help="convex combination of checkpoints")
    p.add_argument("--ckpt", action="append", required=True)
    p.add_argument("--weights", required=True, help="comma separated, e.g. 0.5,0.5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("sweep-pair", help="metric along the segment between two checkpoints")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--num-points", type=int, default=11)
    p.add_argument("--slack", type=float, default=1e-6)
    p.add_argument("--queries", action="append", required=True)
    p.add_argument("--out-dir", required=True)
    _add_scorer(p)
    p.set_defaults(func=cmd_sweep_pair)

    p = sub.add_parser("sweep-simplex", help="metric over the three-ingredient simplex grid")
    p.add_argument("--ckpt", action="append", required=True)
    p.add_argument("--resolution", type=int, default=7)
    p.add_argument("--queries", action="append", required=True)
    p.add_argument("--out-dir", required=True)
    _add_scorer(p)
    p.set_defaults(func=cmd_sweep_simplex)

    p = sub.add_parser("greedy", help="greedy soup over checkpoints")
    p.add_argument("--ckpt", action="append", required=True)
    p.add_argument("--select", help="held-out dataset for selection scores")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write selection trace JSON here")
    _add_scorer(p)
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("season", help="labeled random search for mixture weights")
    p.add_argument("--ckpt", action="append", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--score", choices=("knn", "head"), default="knn")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write trial scores JSON here")
    _add_seed(p)
    p.set_defaults(func=cmd_season)

    p = sub.add_parser("self-season", help="label-free mixture weight descent")
    p.add_argument("--ckpt", action="append", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--peak-lr", type=float, default=0.1)
    p.add_argument("--final-lr", type=float, default=0.01)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--fd-step", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("gd", "adamw"), default="gd")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write entropy curve JSON here")
    _add_seed(p)
    p.set_defaults(func=cmd_self_season)

    p = sub.add_parser("eval", help="score one checkpoint on query datasets")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--queries", action="append", required=True)
    p.add_argument("--out", help="write results JSON here")
    _add_scorer(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run a config-driven experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=None)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=JSON",
        help="override a config field by dotted path, value parsed as JSON",
    )
    _add_seed(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render a simplex sweep as a ternary SVG heatmap")
    p.add_argument("--metrics", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="three comma separated corner names")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SoupkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
