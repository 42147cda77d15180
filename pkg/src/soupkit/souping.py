"""Soup construction and mixture search over trained ingredients.

uniform_soup and greedy_soup combine checkpoints outright; season_random
searches mixture weights by scoring random simplex draws against labels;
self_season needs no labels at all, steering the weights by pushing down
the neighbor entropy of the mixed model's embeddings through central
finite differences on the mixing logits.  lmc_report traces a metric
along the segment between two checkpoints and compares it to the chord.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BatchTooSmall, Diverged, Unsupported
from .evaluator import (
    DEFAULT_K,
    DEFAULT_TEMPERATURE,
    embed_dataset,
    head_accuracy,
    knn_entropy,
    loo_knn_accuracy,
)
from .mixer import MixtureWeights, interpolation_path, mix, sample_simplex_uniform_batch
from .seeding import hash64, make_rng
from .tensor_store import TensorSet
from .toy_models import (
    AdamWState,
    adamw_step,
    batch_indices,
    forward_embed,
    softmax,
    steps_per_epoch,
)

SEASON_SCORES = ("knn", "head")
SELF_SEASON_OPTIMIZERS = ("gd", "adamw")


def _require_ingredients(ingredients) -> int:
    if len(ingredients) < 1:
        raise Unsupported("need at least one ingredient")
    return len(ingredients)


def uniform_soup(ingredients: list[TensorSet]) -> TensorSet:
    """Equal-weight convex combination of all ingredients."""
    m = _require_ingredients(ingredients)
    return mix(ingredients, MixtureWeights(np.full(m, 1.0 / m)))


# ---------------------------------------------------------------------------
# greedy soup


@dataclass(frozen=True)
class GreedyStep:
    """One candidate decision: the trial pool's score and whether it stuck."""

    candidate: int
    trial_score: float
    accepted: bool
    pool: tuple[int, ...]


@dataclass(frozen=True)
class GreedyResult:
    order: tuple[int, ...]
    individual_scores: tuple[float, ...]
    pool: tuple[int, ...]
    steps: tuple[GreedyStep, ...]
    final_score: float


def greedy_soup(ingredients: list[TensorSet], score_fn) -> tuple[TensorSet, GreedyResult]:
    """Grow a pool in descending individual-score order, keeping a candidate
    only when the uniform soup of the grown pool scores at least as well as
    the current pool.

    Ties in the visiting order go to the lower ingredient index, and a
    candidate that exactly matches the current score is accepted.  The
    reported pool is sorted by ingredient index; the steps record the
    acceptance order.
    """
    m = _require_ingredients(ingredients)
    individual = [float(score_fn(ing)) for ing in ingredients]
    order = sorted(range(m), key=lambda i: (-individual[i], i))

    pool = [order[0]]
    current = individual[order[0]]
    steps: list[GreedyStep] = []
    for candidate in order[1:]:
        trial = pool + [candidate]
        trial_score = float(score_fn(uniform_soup([ingredients[i] for i in trial])))
        accepted = trial_score >= current
        if accepted:
            pool = trial
            current = trial_score
        steps.append(
            GreedyStep(
                candidate=candidate,
                trial_score=trial_score,
                accepted=accepted,
                pool=tuple(sorted(pool)),
            )
        )
    soup = uniform_soup([ingredients[i] for i in pool])
    result = GreedyResult(
        order=tuple(order),
        individual_scores=tuple(individual),
        pool=tuple(sorted(pool)),
        steps=tuple(steps),
        final_score=current,
    )
    return soup, result


# ---------------------------------------------------------------------------
# labeled mixture search


@dataclass(frozen=True)
class SeasonConfig:
    trials: int = 1000
    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE
    score: str = "knn"  # "knn": leave-one-out in embedding space; "head": classifier
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise Unsupported("trials must be at least 1")
        if self.k < 1:
            raise Unsupported("k must be at least 1")
        if self.temperature <= 0:
            raise Unsupported("temperature must be positive")
        if self.score not in SEASON_SCORES:
            raise Unsupported(f"score must be one of {SEASON_SCORES}, got {self.score!r}")


@dataclass(frozen=True)
class SeasonResult:
    trial_weights: tuple[tuple[float, ...], ...]
    trial_scores: tuple[float, ...]
    best_trial: int
    best_weights: MixtureWeights = field(repr=False)
    best_score: float


def _score_mixture(model: TensorSet, data, cfg: SeasonConfig, embed) -> float:
    if cfg.score == "head":
        return head_accuracy(model, data)
    z = embed(model, data)
    return loo_knn_accuracy(
        z, data.labels, data.num_classes, k=cfg.k, temperature=cfg.temperature
    )


def season_random(
    ingredients: list[TensorSet],
    data,
    cfg: SeasonConfig = SeasonConfig(),
    embed=embed_dataset,
) -> tuple[TensorSet, SeasonResult]:
    """Score uniform random simplex draws on labeled data, keep the best.

    Equal best scores resolve to the earliest trial, so a fixed seed pins
    the outcome completely.  embed maps (model, dataset) to an embedding
    matrix; swap it to score through a different representation.
    """
    m = _require_ingredients(ingredients)
    rng = make_rng(hash64(cfg.seed, "season"))
    draws = sample_simplex_uniform_batch(m, cfg.trials, rng)
    scores = []
    for t in range(cfg.trials):
        model = mix(ingredients, MixtureWeights(draws[t]))
        scores.append(_score_mixture(model, data, cfg, embed))
    best = int(np.argmax(scores))
    best_weights = MixtureWeights(draws[best])
    result = SeasonResult(
        trial_weights=tuple(tuple(float(v) for v in row) for row in draws),
        trial_scores=tuple(scores),
        best_trial=best,
        best_weights=best_weights,
        best_score=scores[best],
    )
    return mix(ingredients, best_weights), result


# ---------------------------------------------------------------------------
# label-free mixture search


@dataclass(frozen=True)
class MixLogits:
    """Unconstrained mixing parameters; softmax puts them on the simplex."""

    z: np.ndarray = field(repr=False)

    def weights(self) -> MixtureWeights:
        return MixtureWeights(softmax(np.asarray(self.z, dtype=np.float64)))


@dataclass(frozen=True)
class SelfSeasonConfig:
    epochs: int = 100
    batch_size: int = 256
    peak_lr: float = 0.1
    final_lr: float = 0.01
    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE
    fd_step: float = 1e-3
    optimizer: str = "gd"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise Unsupported("epochs must be at least 1")
        if self.batch_size < 2:
            raise Unsupported("batch_size must be at least 2")
        if self.peak_lr <= 0 or self.final_lr <= 0:
            raise Unsupported("learning rates must be positive")
        if self.k < 1:
            raise Unsupported("k must be at least 1")
        if self.temperature <= 0:
            raise Unsupported("temperature must be positive")
        if self.fd_step <= 0:
            raise Unsupported("fd_step must be positive")
        if self.optimizer not in SELF_SEASON_OPTIMIZERS:
            raise Unsupported(
                f"optimizer must be one of {SELF_SEASON_OPTIMIZERS}, got {self.optimizer!r}"
            )


@dataclass(frozen=True)
class SelfSeasonResult:
    weights: MixtureWeights = field(repr=False)
    logits: tuple[float, ...]
    entropy_by_epoch: tuple[float, ...]


def self_season_lr(epoch: int, cfg: SelfSeasonConfig) -> float:
    """Cosine decay over epochs from peak_lr down to final_lr."""
    if cfg.epochs == 1:
        return cfg.peak_lr
    frac = epoch / (cfg.epochs - 1)
    return cfg.final_lr + (cfg.peak_lr - cfg.final_lr) * 0.5 * (1.0 + math.cos(math.pi * frac))


def fd_gradient(fn, x0: np.ndarray, h: float) -> np.ndarray:
    """Central differences of a scalar function at a 1-D point."""
    g = np.empty_like(x0)
    for j in range(x0.size):
        up = x0.copy()
        up[j] += h
        down = x0.copy()
        down[j] -= h
        g[j] = (fn(up) - fn(down)) / (2.0 * h)
    return g


def mixture_entropy_objective(
    ingredients, logits: np.ndarray, xb: np.ndarray, k, temperature, embed=forward_embed
):
    """Neighbor entropy of one batch embedded by the softmax(logits) soup."""
    model = mix(ingredients, MixLogits(np.asarray(logits, dtype=np.float64)).weights())
    return knn_entropy(embed(model, xb), k=k, temperature=temperature)


def self_season(
    ingredients: list[TensorSet],
    data,
    cfg: SelfSeasonConfig = SelfSeasonConfig(),
    embed=forward_embed,
) -> tuple[TensorSet, SelfSeasonResult]:
    """Find mixture weights without labels by minimizing neighbor entropy.

    Mixing logits start uniform at zero; each batch takes one optimizer
    step on the central-difference gradient of the batch objective, 2 times
    as many evaluations as ingredients.  The recorded curve holds each
    epoch's mean batch entropy at the weights current when the batch was
    visited.  embed maps (model, batch of inputs) to embedding rows.
    """
    m = _require_ingredients(ingredients)
    if m < 2:
        raise Unsupported("mixture search needs at least two ingredients")
    x = np.asarray(data.inputs, dtype=np.float64)
    n = x.shape[0]
    effective_batch = n if n < cfg.batch_size else cfg.batch_size
    if effective_batch <= cfg.k:
        raise BatchTooSmall(
            f"batches of {effective_batch} rows cannot support k={cfg.k} neighbors"
        )

    logits = np.zeros(m)
    state = AdamWState()
    spe = steps_per_epoch(n, cfg.batch_size)
    curve: list[float] = []
    for epoch in range(cfg.epochs):
        lr = self_season_lr(epoch, cfg)
        batch_values: list[float] = []
        for pos in range(spe):
            idx = batch_indices(n, cfg.batch_size, epoch * spe + pos, cfg.seed, tag="season")
            xb = x[idx]

            def objective(l: np.ndarray) -> float:
                return mixture_entropy_objective(
                    ingredients, l, xb, cfg.k, cfg.temperature, embed
                )

            center = objective(logits)
            if not math.isfinite(center):
                raise Diverged(f"objective became {center} at epoch {epoch}")
            batch_values.append(center)
            grad = fd_gradient(objective, logits, cfg.fd_step)
            if cfg.optimizer == "gd":
                logits = logits - lr * grad
            else:
                ws = {"logits": logits}
                adamw_step(ws, {"logits": grad}, state, lr, 0.0)
                logits = ws["logits"]
        curve.append(float(np.mean(batch_values)))

    weights = MixLogits(logits).weights()
    result = SelfSeasonResult(
        weights=weights,
        logits=tuple(float(v) for v in logits),
        entropy_by_epoch=tuple(curve),
    )
    return mix(ingredients, weights), result


# ---------------------------------------------------------------------------
# interpolation reports


DEFAULT_LMC_SLACK = 1e-6


@dataclass(frozen=True)
class LMCReport:
    """Metric along the segment between two checkpoints, against the chord.

    ``satisfied`` marks the grid points where the curve does not dip more
    than ``slack`` below the straight line between the endpoint metrics;
    ``holds`` requires that at every interior point, and ``violations``
    lists the interior indices that break it.  ``barrier`` is the deepest
    dip below the chord (0 when the curve never dips).
    """

    lambdas: tuple[float, ...]
    metrics: tuple[float, ...]
    chords: tuple[float, ...]
    satisfied: tuple[bool, ...]
    violations: tuple[int, ...]
    slack: float
    barrier: float
    holds: bool


def lmc_report(
    a: TensorSet,
    b: TensorSet,
    metric_fn,
    num_points: int = 11,
    slack: float = DEFAULT_LMC_SLACK,
) -> LMCReport:
    # endpoints anchor the chord; interior points are where connectivity can fail
    if num_points < 3:
        raise Unsupported("num_points must be at least 3 to have an interior point")
    if slack < 0:
        raise Unsupported("slack must be nonnegative")
    lambdas = [j / (num_points - 1) for j in range(num_points)]
    models = interpolation_path(a, b, lambdas)
    metrics = [float(metric_fn(model)) for model in models]
    m0, m1 = metrics[0], metrics[-1]
    chords = [(1.0 - lam) * m0 + lam * m1 for lam in lambdas]
    satisfied = [met >= chord - slack for met, chord in zip(metrics, chords)]
    interior = range(1, num_points - 1)
    violations = tuple(j for j in interior if not satisfied[j])
    barrier = max(max(chord - met, 0.0) for met, chord in zip(metrics, chords))
    return LMCReport(
        lambdas=tuple(lambdas),
        metrics=tuple(metrics),
        chords=tuple(chords),
        satisfied=tuple(satisfied),
        violations=violations,
        slack=float(slack),
        barrier=float(barrier),
        holds=not violations,
    )
