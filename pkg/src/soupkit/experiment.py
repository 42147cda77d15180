"""Config-driven experiment runner.

An experiment is: a stock, M inter-trainings, N fine-tunings of each
(M*N ingredients; with M=0 the fine-tunings start from the stock, with
N=0 the inter-trained models are the ingredients), one mix method, and a
set of evaluations.  Every job seed is derived from the experiment seed
and the job's kind and index, so scheduling and worker count can never
change any number; metrics.csv is byte-identical across reruns.

Artifacts land in out_dir: checkpoints, metrics.csv, manifest.json, and
per-method extras (season/self_season weight reports, pair-sweep
connectivity reports).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import threading
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .datasets import gen_patterns, corrupt, load_dataset, split_even_odd
from .errors import ExperimentFailed, Unsupported
from .evaluator import (
    DEFAULT_K,
    DEFAULT_TEMPERATURE,
    embed_dataset,
    head_accuracy,
    knn_accuracy,
    loo_knn_accuracy,
)
from .mixer import MixtureWeights, SimplexGridSpec, barycentric_centroid_grid, mix
from .seeding import hash64
from .souping import (
    SeasonConfig,
    SelfSeasonConfig,
    greedy_soup,
    season_random,
    self_season,
    uniform_soup,
)
from .ssl_objectives import SSLConfig, inter_train
from .tensor_store import CheckpointMeta, TensorSet, load_checkpoint, save_checkpoint
from .toy_models import EncoderConfig, TrainConfig, init_stock, train_supervised

MIX_METHODS = ("uniform", "greedy", "season", "self_season", "simplex", "pair_sweep")
SCORERS = ("knn", "head")
METRICS_HEADER = ("mixture_id", "weights", "split", "metric", "value")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(raw: Mapping) -> str:
    # out_dir places the artifacts; it is not part of the experiment identity
    hashed = {k: v for k, v in raw.items() if k != "out_dir"}
    return hashlib.sha256(canonical_json(hashed).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description, one-to-one with its JSON file.

    stock: {"init": {encoder dims}} or {"path": checkpoint}.
    inter_trainings: [{"ssl": {SSLConfig fields}, "data": ref}, ...].
    fine_tunings: [{"train": {TrainConfig fields}, "data": ref}, ...].
    eval: {"scorer": "knn"|"head", "knn": {"k", "temperature"},
           "train_ref": ref, "select": ref?, "queries": [refs]}.
    options: per-method settings ("simplex": {"resolution"},
             "pair_sweep": {"num_points", "slack"}, "season": {...},
             "self_season": {...}, "season_data": ref,
             "self_season_data": ref).

    A dataset ref is {"path": file} or {"gen_patterns": {args}} plus
    optional "corrupt": {"kind", "severity"}, "take": "even"|"odd",
    "unlabeled": true, and "name" for the metrics split column.  Job seeds
    never come from these dicts; they are derived from `seed`.
    """

    stock: Mapping
    inter_trainings: tuple[Mapping, ...]
    fine_tunings: tuple[Mapping, ...]
    mix_method: str
    eval: Mapping
    seed: int
    out_dir: str
    options: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.mix_method not in MIX_METHODS:
            raise Unsupported(
                f"mix_method must be one of {MIX_METHODS}, got {self.mix_method!r}"
            )
        if ("path" in self.stock) == ("init" in self.stock):
            raise Unsupported('stock needs exactly one of "path" and "init"')
        if not self.inter_trainings and not self.fine_tunings:
            raise Unsupported("need at least one inter-training or fine-tuning")
        scorer = self.eval.get("scorer", "knn")
        if scorer not in SCORERS:
            raise Unsupported(f"scorer must be one of {SCORERS}, got {scorer!r}")
        if not self.eval.get("queries"):
            raise Unsupported("eval.queries must name at least one dataset")
        if scorer == "knn" and "train_ref" not in self.eval:
            raise Unsupported("knn scoring needs eval.train_ref")

    @property
    def num_ingredients(self) -> int:
        m, n = len(self.inter_trainings), len(self.fine_tunings)
        return m * n if m and n else max(m, n)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        known = {
            "stock",
            "inter_trainings",
            "fine_tunings",
            "mix_method",
            "eval",
            "seed",
            "out_dir",
            "options",
        }
        unknown = set(raw) - known
        if unknown:
            raise Unsupported(f"unknown config keys {sorted(unknown)}")
        return cls(
            stock=dict(raw.get("stock", {})),
            inter_trainings=tuple(raw.get("inter_trainings", [])),
            fine_tunings=tuple(raw.get("fine_tunings", [])),
            mix_method=raw.get("mix_method", "uniform"),
            eval=dict(raw.get("eval", {})),
            seed=int(raw.get("seed", 0)),
            out_dir=str(raw.get("out_dir", "runs/experiment")),
            options=dict(raw.get("options", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "stock": dict(self.stock),
            "inter_trainings": [dict(e) for e in self.inter_trainings],
            "fine_tunings": [dict(e) for e in self.fine_tunings],
            "mix_method": self.mix_method,
            "eval": dict(self.eval),
            "seed": int(self.seed),
            "out_dir": self.out_dir,
            "options": dict(self.options),
        }


def apply_overrides(raw: dict, pairs: list[str]) -> dict:
    """Apply ``dotted.path=json_value`` overrides to a nested config dict.

    Integer path segments index into lists, so
    ``fine_tunings.0.train.steps=4`` works.
    """
    out = json.loads(json.dumps(raw))
    for pair in pairs:
        if "=" not in pair:
            raise Unsupported(f"override {pair!r} is not key=value")
        dotted, text = pair.split("=", 1)
        keys = dotted.split(".")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        for k in keys[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(k)]
                except (ValueError, IndexError):
                    raise Unsupported(f"override {dotted!r}: bad list index {k!r}") from None
            elif isinstance(node, dict):
                node = node.setdefault(k, {})
            else:
                raise Unsupported(f"override {dotted!r} descends through a scalar")
        last = keys[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError):
                raise Unsupported(f"override {dotted!r}: bad list index {last!r}") from None
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise Unsupported(f"override {dotted!r} descends through a scalar")
    return out


# ---------------------------------------------------------------------------
# dataset references


class _DataCache:
    """Resolves dataset refs, each distinct ref once."""

    def __init__(self, seed: int):
        self.seed = seed
        self._lock = threading.Lock()
        self._cache: dict[str, object] = {}

    def resolve(self, ref: Mapping):
        key = canonical_json({k: v for k, v in ref.items() if k != "name"})
        # seeds derive from the source alone, so even/odd or unlabeled views
        # of one declared dataset slice the same generated pool
        source = canonical_json(
            {k: ref[k] for k in ("path", "gen_patterns", "corrupt") if k in ref}
        )
        with self._lock:
            if key not in self._cache:
                self._cache[key] = self._build(ref, hash64(self.seed, "data", source))
            return self._cache[key]

    def _build(self, ref: Mapping, base: int):
        if ("path" in ref) == ("gen_patterns" in ref):
            raise Unsupported('dataset ref needs exactly one of "path" and "gen_patterns"')
        if "path" in ref:
            ds = load_dataset(ref["path"])
        else:
            kwargs = dict(ref["gen_patterns"])
            kwargs["seed"] = hash64(base, "gen")
            ds = gen_patterns(**kwargs)
        if "corrupt" in ref:
            spec = ref["corrupt"]
            ds = corrupt(
                ds,
                spec["kind"],
                int(spec["severity"]),
                seed=hash64(base, "corrupt"),
            )
        if "take" in ref:
            even, odd = split_even_odd(ds)
            if ref["take"] == "even":
                ds = even
            elif ref["take"] == "odd":
                ds = odd
            else:
                raise Unsupported(f'take must be "even" or "odd", got {ref["take"]!r}')
        if ref.get("unlabeled") and hasattr(ds, "unlabeled"):
            ds = ds.unlabeled()
        return ds


def query_name(ref: Mapping, ds, index: int) -> str:
    if "name" in ref:
        return str(ref["name"])
    return getattr(ds, "split", "") or f"query_{index}"


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    checkpoints: dict[str, str] = field(default_factory=dict)
    mixtures: dict[str, list[float]] = field(default_factory=dict)
    metrics_path: str = "metrics.csv"
    failed: list[str] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": int(self.seed),
            "checkpoints": dict(self.checkpoints),
            "mixtures": {k: list(v) for k, v in self.mixtures.items()},
            "metrics": self.metrics_path,
            "failed": list(self.failed),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            config_hash=raw["config_hash"],
            seed=int(raw["seed"]),
            checkpoints=dict(raw.get("checkpoints", {})),
            mixtures={k: [float(x) for x in v] for k, v in raw.get("mixtures", {}).items()},
            metrics_path=raw.get("metrics", "metrics.csv"),
            failed=list(raw.get("failed", [])),
        )


def metrics_csv_text(rows) -> str:
    """Render metrics rows with a fixed header and repr float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for mixture_id, weights, split, metric, value in rows:
        writer.writerow(
            (
                mixture_id,
                json.dumps([float(w) for w in weights], separators=(",", ":")),
                split,
                metric,
                repr(float(value)),
            )
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# job execution


def _run_jobs(jobs, workers: int, out_dir: Path):
    """Run (job_id, fn) pairs, return results aligned with jobs.

    Failures write a ``<job_id>.failed`` marker with the error text and
    leave None in the results slot.
    """
    results = [None] * len(jobs)
    failures: list[str] = []
    if workers <= 1:

        def outcomes():
            for i, (job_id, fn) in enumerate(jobs):
                try:
                    yield i, job_id, fn(), None
                except Exception as exc:  # noqa: BLE001 - marker path
                    yield i, job_id, None, exc

        stream = outcomes()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(i, job_id, pool.submit(fn)) for i, (job_id, fn) in enumerate(jobs)]
            collected = []
            for i, job_id, fut in futures:
                try:
                    collected.append((i, job_id, fut.result(), None))
                except Exception as exc:  # noqa: BLE001 - marker path
                    collected.append((i, job_id, None, exc))
        stream = iter(collected)
    for i, job_id, value, exc in stream:
        if exc is None:
            results[i] = value
        else:
            message = f"{job_id}: {type(exc).__name__}: {exc}"
            (out_dir / f"{job_id}.failed").write_text(message + "\n", encoding="utf-8")
            failures.append(message)
    return results, failures


def _save(out_dir: Path, manifest: RunManifest, name: str, params: TensorSet, meta: CheckpointMeta):
    path = f"{name}.ckpt"
    save_checkpoint(out_dir / path, params, meta)
    manifest.checkpoints[name] = path


# ---------------------------------------------------------------------------
# scoring


def _make_scorer(cfg: ExperimentConfig, data: _DataCache):
    """Metric function (params, query dataset) -> value, plus its name."""
    scorer = cfg.eval.get("scorer", "knn")
    if scorer == "head":
        return "head_accuracy", lambda params, ds: head_accuracy(params, ds)
    knn = cfg.eval.get("knn", {})
    k = int(knn.get("k", DEFAULT_K))
    temperature = float(knn.get("temperature", DEFAULT_TEMPERATURE))
    refs = data.resolve(cfg.eval["train_ref"])

    def score(params, ds) -> float:
        return knn_accuracy(params, refs, ds, k=k, temperature=temperature)

    return "knn_accuracy", score


def _selection_score_fn(cfg: ExperimentConfig, data: _DataCache):
    """Scalar score for greedy selection: eval on the select split, or
    leave-one-out on the train_ref when no select split is configured."""
    scorer = cfg.eval.get("scorer", "knn")
    select_ref = cfg.eval.get("select")
    if scorer == "head":
        ds = data.resolve(select_ref if select_ref else cfg.eval["queries"][0])
        return lambda params: head_accuracy(params, ds)
    knn = cfg.eval.get("knn", {})
    k = int(knn.get("k", DEFAULT_K))
    temperature = float(knn.get("temperature", DEFAULT_TEMPERATURE))
    refs = data.resolve(cfg.eval["train_ref"])
    if select_ref:
        queries = data.resolve(select_ref)
        return lambda params: knn_accuracy(params, refs, queries, k=k, temperature=temperature)
    return lambda params: loo_knn_accuracy(
        embed_dataset(params, refs), refs.labels, refs.num_classes, k=k, temperature=temperature
    )


# ---------------------------------------------------------------------------
# mixture construction


def _one_hot(m: int, index: int) -> np.ndarray:
    w = np.zeros(m)
    w[index] = 1.0
    return w


def _build_mixtures(cfg: ExperimentConfig, ingredients, data):
    """The (mixture_id, weights, model) rows the mix method defines."""
    m = len(ingredients)
    method = cfg.mix_method
    extras: dict[str, dict] = {}

    if method in ("uniform", "greedy", "season", "self_season"):
        mixtures = [
            (f"ingredient_{i}", _one_hot(m, i), ingredients[i]) for i in range(m)
        ]
        if method == "uniform":
            mixtures.append(("uniform", np.full(m, 1.0 / m), uniform_soup(ingredients)))
        elif method == "greedy":
            soup, result = greedy_soup(ingredients, _selection_score_fn(cfg, data))
            weights = np.zeros(m)
            weights[list(result.pool)] = 1.0 / len(result.pool)
            mixtures.append(("greedy", weights, soup))
            extras["greedy"] = {
                "pool": list(result.pool),
                "order": list(result.order),
                "individual_scores": list(result.individual_scores),
                "final_score": result.final_score,
            }
        elif method == "season":
            job_seed = hash64(cfg.seed, "season", 0)
            season_cfg = SeasonConfig(
                **{**dict(cfg.options.get("season", {})), "seed": job_seed}
            )
            ref = cfg.options.get("season_data") or cfg.eval["train_ref"]
            soup, result = season_random(ingredients, data.resolve(ref), season_cfg)
            mixtures.append(("season", result.best_weights.w, soup))
            extras["season"] = {
                "weights": [float(v) for v in result.best_weights.w],
                "scores": list(result.trial_scores),
                "best_trial": result.best_trial,
                "best_score": result.best_score,
                "seed": job_seed,
                "config": canonical_json(dict(cfg.options.get("season", {}))),
            }
        else:
            job_seed = hash64(cfg.seed, "self_season", 0)
            ss_cfg = SelfSeasonConfig(
                **{**dict(cfg.options.get("self_season", {})), "seed": job_seed}
            )
            ref = cfg.options.get("self_season_data")
            if ref is None:
                ref = dict(cfg.eval["train_ref"])
                ref["unlabeled"] = True
            soup, result = self_season(ingredients, data.resolve(ref), ss_cfg)
            mixtures.append(("self_season", result.weights.w, soup))
            extras["self_season"] = {
                "weights": [float(v) for v in result.weights.w],
                "logits": list(result.logits),
                "entropy_by_epoch": list(result.entropy_by_epoch),
                "seed": job_seed,
                "config": canonical_json(dict(cfg.options.get("self_season", {}))),
            }
        return mixtures, extras

    if method == "simplex":
        if m != 3:
            raise Unsupported(f"simplex mixing needs exactly 3 ingredients, got {m}")
        resolution = int(cfg.options.get("simplex", {}).get("resolution", 7))
        mixtures = [(f"corner_{i}", _one_hot(3, i), ingredients[i]) for i in range(3)]
        grid = barycentric_centroid_grid(SimplexGridSpec(3, resolution))
        for i, weights in enumerate(grid):
            mixtures.append((f"cell_{i}", weights.w, mix(ingredients, weights)))
        return mixtures, extras

    if m != 2:
        raise Unsupported(f"pair_sweep needs exactly 2 ingredients, got {m}")
    num_points = int(cfg.options.get("pair_sweep", {}).get("num_points", 11))
    if num_points < 2:
        raise Unsupported("pair_sweep needs at least 2 points")
    mixtures = []
    for i in range(num_points):
        lam = i / (num_points - 1)
        weights = np.array([1.0 - lam, lam])
        mixtures.append((f"lambda_{i}", weights, mix(ingredients, MixtureWeights(weights))))
    return mixtures, extras


# ---------------------------------------------------------------------------
# the runner


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> RunManifest:
    """Execute every stage of an experiment and write its artifacts.

    Raises ExperimentFailed after writing the manifest if any job failed;
    completed checkpoints and the failure markers stay on disk.
    """
    if workers < 1:
        raise Unsupported("workers must be at least 1")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = cfg.to_dict()
    manifest = RunManifest(config_hash=config_hash(raw), seed=cfg.seed)
    (out_dir / "config.json").write_text(canonical_json(raw) + "\n", encoding="utf-8")
    data = _DataCache(cfg.seed)

    # BLAS pinned to one thread: job bytes must not depend on pool sizes
    failures: list[str] = []
    with threadpool_limits(limits=1):
        try:
            failures = _stages(cfg, data, manifest, out_dir, workers)
        finally:
            manifest.failed = list(failures)
            manifest.save(out_dir / "manifest.json")
    if failures:
        raise ExperimentFailed("; ".join(failures))
    return manifest


def _stages(cfg, data, manifest, out_dir, workers) -> list[str]:
    # stock
    def stock_job():
        if "path" in cfg.stock:
            params, _ = load_checkpoint(cfg.stock["path"])
            return params
        spec = dict(cfg.stock["init"])
        enc = EncoderConfig(
            input_dim=int(spec["input_dim"]),
            hidden_dims=tuple(spec.get("hidden_dims", (64, 64))),
            embed_dim=int(spec.get("embed_dim", 32)),
        )
        return init_stock(enc, hash64(cfg.seed, "stock", 0))

    results, failures = _run_jobs([("stock", stock_job)], 1, out_dir)
    if failures:
        return failures
    stock = results[0]
    _save(
        out_dir,
        manifest,
        "stock",
        stock,
        CheckpointMeta(role="stock", seed=hash64(cfg.seed, "stock", 0)),
    )

    # inter-trainings
    def inter_job(index: int, entry: Mapping):
        def job():
            ssl_cfg = SSLConfig(
                **{**dict(entry["ssl"]), "seed": hash64(cfg.seed, "inter_train", index)}
            )
            return inter_train(stock, data.resolve(entry["data"]), ssl_cfg)

        return job

    inter_jobs = [
        (f"inter_{j}", inter_job(j, entry)) for j, entry in enumerate(cfg.inter_trainings)
    ]
    inters, failures = _run_jobs(inter_jobs, workers, out_dir)
    if failures:
        return failures
    for j, params in enumerate(inters):
        _save(
            out_dir,
            manifest,
            f"inter_{j}",
            params,
            CheckpointMeta(
                role="inter_trained",
                lineage=["stock"],
                seed=hash64(cfg.seed, "inter_train", j),
                hyperparams={"algorithm": str(cfg.inter_trainings[j]["ssl"]["algorithm"])},
            ),
        )

    # fine-tunings: every inter-trained model (or the stock) gets each one
    bases = list(enumerate(inters)) if inters else [(None, stock)]
    n = len(cfg.fine_tunings)
    ft_jobs = []
    ft_parents = []
    for b, (j, base) in enumerate(bases):
        for i, entry in enumerate(cfg.fine_tunings):
            k = b * n + i

            def job(base=base, entry=entry, k=k):
                train_cfg = TrainConfig(
                    **{**dict(entry["train"]), "seed": hash64(cfg.seed, "fine_tune", k)}
                )
                return train_supervised(base, data.resolve(entry["data"]), train_cfg)

            ft_jobs.append((f"ingredient_{k}", job))
            ft_parents.append("stock" if j is None else f"inter_{j}")

    if ft_jobs:
        tuned, failures = _run_jobs(ft_jobs, workers, out_dir)
        if failures:
            return failures
        ingredients = []
        for k, params in enumerate(tuned):
            _save(
                out_dir,
                manifest,
                f"ingredient_{k}",
                params,
                CheckpointMeta(
                    role="fine_tuned",
                    lineage=[ft_parents[k]],
                    seed=hash64(cfg.seed, "fine_tune", k),
                ),
            )
            ingredients.append(params)
        ingredient_ids = [f"ingredient_{k}" for k in range(len(ingredients))]
    else:
        ingredients = list(inters)
        ingredient_ids = [f"inter_{j}" for j in range(len(inters))]

    # mixing
    def mix_job():
        return _build_mixtures(cfg, ingredients, data)

    results, failures = _run_jobs([(f"mix_{cfg.mix_method}", mix_job)], 1, out_dir)
    if failures:
        return failures
    mixtures, extras = results[0]
    for mixture_id, weights, _ in mixtures:
        manifest.mixtures[mixture_id] = [float(w) for w in weights]
    for name, payload in extras.items():
        (out_dir / f"{name}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if cfg.mix_method in ("uniform", "greedy", "season", "self_season"):
        soup_id, soup_weights, soup_model = mixtures[-1]
        _save(
            out_dir,
            manifest,
            f"soup_{soup_id}",
            soup_model,
            CheckpointMeta(
                role="soup",
                lineage=list(ingredient_ids),
                seed=cfg.seed,
                hyperparams={
                    "weights": canonical_json([float(w) for w in soup_weights])
                },
            ),
        )

    # evaluations
    metric_name, score = _make_scorer(cfg, data)
    queries = []
    for i, ref in enumerate(cfg.eval["queries"]):
        ds = data.resolve(ref)
        queries.append((query_name(ref, ds, i), ds))
    eval_jobs = []
    for mixture_id, weights, model in mixtures:
        for split, ds in queries:
            def job(model=model, ds=ds):
                return score(model, ds)

            eval_jobs.append((f"eval_{mixture_id}_{split}", job))
    values, failures = _run_jobs(eval_jobs, workers, out_dir)
    if failures:
        return failures

    pos = 0
    for mixture_id, weights, _ in mixtures:
        for split, _ds in queries:
            manifest.rows.append((mixture_id, list(weights), split, metric_name, values[pos]))
            pos += 1
    (out_dir / manifest.metrics_path).write_text(
        metrics_csv_text(manifest.rows), encoding="utf-8"
    )

    if cfg.mix_method == "pair_sweep":
        from .reports import pair_sweep_report

        slack = float(cfg.options.get("pair_sweep", {}).get("slack", 1e-6))
        for split, _ds in queries:
            lams = [w[1] for mid, w, s, _m, _v in manifest.rows if s == split]
            vals = [v for _mid, _w, s, _m, v in manifest.rows if s == split]
            csv_text, summary = pair_sweep_report(lams, vals, slack=slack)
            (out_dir / f"lmc_{split}.csv").write_text(csv_text, encoding="utf-8")
            (out_dir / f"lmc_{split}.json").write_text(
                json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
    return []
