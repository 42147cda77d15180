"""Self-supervised objectives over the toy encoder, and inter-training.

Three objectives share the encoder: masked reconstruction (zero a fraction
of input coordinates, decode, score only what was hidden), a two-view
InfoNCE contrastive loss over a projection head, and a dimension-decorrelating
two-view loss (invariance + variance hinge + off-diagonal covariance).

Each objective exposes a public loss op that draws its stochastic parts
from a caller-provided generator, plus a deterministic core that takes the
drawn masks/views explicitly.  Gradients come from the cores and are
finite-difference-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BatchTooSmall, Diverged, Unsupported
from .seeding import hash64, make_rng
from .tensor_store import TensorSet
from .toy_models import (
    AdamWState,
    DECODER_B,
    DECODER_W,
    adamw_step,
    batch_indices,
    encoder_names,
    encoder_stack,
    from_workspace,
    init_decoder_head,
    init_projection_head,
    lr_at,
    projection_stack,
    stack_backward,
    stack_forward,
    workspace,
)

ALGORITHMS = ("masked_recon", "infonce", "dim_contrastive")


@dataclass(frozen=True)
class AugParams:
    """Two-view augmentation: additive Gaussian noise, then coordinate masking."""

    noise_sigma: float = 0.1
    mask_frac: float = 0.25

    def __post_init__(self):
        if self.noise_sigma < 0 or not 0.0 <= self.mask_frac < 1.0:
            raise Unsupported(f"bad augmentation parameters {self}")


@dataclass(frozen=True)
class SSLConfig:
    """Settings for one inter-training run.

    ``aug_noise_sigma=None`` resolves to 0.1 times the pixel std of the
    training inputs when inter_train starts.  ``local_views`` adds the same
    dim_contrastive loss on a pair of random coordinate-subset views.
    """

    algorithm: str
    steps: int | None = None
    epochs: int | None = None
    batch_size: int = 64
    peak_lr: float = 1e-3
    warmup_frac: float = 0.1
    weight_decay: float = 0.01
    seed: int = 0
    mask_ratio: float = 0.75
    temperature: float = 0.1
    aug_noise_sigma: float | None = None
    aug_mask_frac: float = 0.25
    variance_target: float = 1.0
    local_views: bool = False
    local_frac: float = 0.5
    proj_hidden: int = 32
    proj_dim: int = 16

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise Unsupported(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if (self.steps is None) == (self.epochs is None):
            raise Unsupported("set exactly one of steps and epochs")
        for name in ("steps", "epochs"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise Unsupported(f"{name} must be nonnegative")
        if self.batch_size < 1:
            raise Unsupported("batch_size must be positive")
        if not 0.0 < self.mask_ratio < 1.0:
            raise Unsupported("mask_ratio must lie in (0, 1)")
        if self.temperature <= 0:
            raise Unsupported("temperature must be positive")
        if not 0.0 < self.local_frac <= 1.0:
            raise Unsupported("local_frac must lie in (0, 1]")


# ---------------------------------------------------------------------------
# stochastic draws

def draw_recon_mask(rng: np.random.Generator, b: int, d: int, mask_ratio: float) -> np.ndarray:
    """Boolean (b, d) mask; True marks coordinates hidden from the encoder.

    Each row hides floor(mask_ratio * d) distinct coordinates, so a ratio
    small enough to floor to zero masks nothing and the loss is 0 by
    convention.
    """
    if not 0.0 <= mask_ratio < 1.0:
        raise Unsupported("mask_ratio must lie in [0, 1)")
    k = int(mask_ratio * d)
    mask = np.zeros((b, d), dtype=bool)
    for i in range(b):
        mask[i, rng.choice(d, size=k, replace=False)] = True
    return mask


def draw_coord_keep(rng: np.random.Generator, b: int, d: int, keep_frac: float) -> np.ndarray:
    """Boolean (b, d) keep-mask retaining ceil(keep_frac * d) coordinates per row."""
    k = max(1, math.ceil(keep_frac * d))
    keep = np.zeros((b, d), dtype=bool)
    for i in range(b):
        keep[i, rng.choice(d, size=k, replace=False)] = True
    return keep


def draw_views(rng: np.random.Generator, x: np.ndarray, aug: AugParams):
    """Two augmented views of a batch; noise then masking, view 1 then view 2."""
    views = []
    b, d = x.shape
    for _ in range(2):
        v = x + aug.noise_sigma * rng.standard_normal((b, d)) if aug.noise_sigma > 0 else x.copy()
        if aug.mask_frac > 0:
            drop = draw_recon_mask(rng, b, d, aug.mask_frac)
            v = np.where(drop, 0.0, v)
        views.append(v)
    return views[0], views[1]


def draw_local_views(rng: np.random.Generator, x: np.ndarray, keep_frac: float):
    """Two views that each keep an independent random coordinate subset."""
    b, d = x.shape
    out = []
    for _ in range(2):
        keep = draw_coord_keep(rng, b, d, keep_frac)
        out.append(np.where(keep, x, 0.0))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# masked reconstruction

def masked_recon_core(ws, x, mask, with_grads: bool = False):
    """MSE on masked coordinates of a linear decode of the masked input."""
    count = int(mask.sum())
    if count == 0:
        return 0.0, ({} if with_grads else None)
    x_in = np.where(mask, 0.0, x)
    stack = encoder_stack(list(ws))
    z, caches = stack_forward(ws, stack, x_in)
    x_hat = z @ ws[DECODER_W] + ws[DECODER_B]
    diff = np.where(mask, x_hat - x, 0.0)
    loss = float((diff * diff).sum() / count)
    if not with_grads:
        return loss, None
    d_hat = 2.0 * diff / count
    grads = {DECODER_W: z.T @ d_hat, DECODER_B: d_hat.sum(axis=0)}
    d_embed = d_hat @ ws[DECODER_W].T
    stack_backward(ws, stack, caches, d_embed, grads)
    return loss, grads


def masked_recon_loss(params, batch, mask_ratio: float, rng: np.random.Generator) -> float:
    ws = params if isinstance(params, dict) else workspace(params)
    x = np.asarray(batch, dtype=np.float64)
    mask = draw_recon_mask(rng, x.shape[0], x.shape[1], mask_ratio)
    loss, _ = masked_recon_core(ws, x, mask)
    return loss


# ---------------------------------------------------------------------------
# InfoNCE

def _l2_rows(p: np.ndarray):
    norms = np.sqrt((p * p).sum(axis=1, keepdims=True))
    norms = np.maximum(norms, 1e-12)
    return p / norms, norms


def infonce_from_projections(p1: np.ndarray, p2: np.ndarray, temperature: float):
    """Symmetric cross-entropy that matches row i of one view to row i of
    the other across the batch; returns (loss, d_p1, d_p2).

    Projections are L2-normalized per row; similarities are scaled by
    1/temperature.  With two samples whose normalized projections are
    orthogonal and identical across views, each direction contributes
    log(1 + exp(-1/temperature)); with all rows identical the loss is
    log(batch).
    """
    b = p1.shape[0]
    if b < 2:
        raise BatchTooSmall("the contrastive loss needs at least 2 rows")
    u1, n1 = _l2_rows(p1)
    u2, n2 = _l2_rows(p2)
    s = (u1 @ u2.T) / temperature
    sm_row = _softmax2(s, axis=1)
    sm_col = _softmax2(s, axis=0)
    diag = np.arange(b)
    loss = 0.5 * (
        -np.log(np.maximum(sm_row[diag, diag], 1e-300)).mean()
        - np.log(np.maximum(sm_col[diag, diag], 1e-300)).mean()
    )
    eye = np.eye(b)
    ds = 0.5 * ((sm_row - eye) + (sm_col - eye)) / b / temperature
    du1 = ds @ u2
    du2 = ds.T @ u1
    dp1 = (du1 - u1 * (du1 * u1).sum(axis=1, keepdims=True)) / n1
    dp2 = (du2 - u2 * (du2 * u2).sum(axis=1, keepdims=True)) / n2
    return float(loss), dp1, dp2


def _softmax2(z, axis):
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _project(ws, v):
    stack = encoder_stack(list(ws))
    z, enc_cache = stack_forward(ws, stack, v)
    proj = projection_stack()
    p, proj_cache = stack_forward(ws, proj, z)
    return p, (stack, enc_cache, proj, proj_cache)


def _project_backward(ws, cache, d_p, grads):
    stack, enc_cache, proj, proj_cache = cache
    d_embed = stack_backward(ws, proj, proj_cache, d_p, grads)
    stack_backward(ws, stack, enc_cache, d_embed, grads)


def infonce_core(ws, v1, v2, temperature: float, with_grads: bool = False):
    p1, cache1 = _project(ws, v1)
    p2, cache2 = _project(ws, v2)
    loss, dp1, dp2 = infonce_from_projections(p1, p2, temperature)
    if not with_grads:
        return loss, None
    grads: dict[str, np.ndarray] = {}
    _project_backward(ws, cache1, dp1, grads)
    _project_backward(ws, cache2, dp2, grads)
    return loss, grads


def infonce_loss(params, batch, temperature: float, aug: AugParams, rng: np.random.Generator) -> float:
    ws = params if isinstance(params, dict) else workspace(params)
    x = np.asarray(batch, dtype=np.float64)
    v1, v2 = draw_views(rng, x, aug)
    loss, _ = infonce_core(ws, v1, v2, temperature)
    return loss


# ---------------------------------------------------------------------------
# dimension-decorrelating loss

INVARIANCE_COEF = 25.0
VARIANCE_COEF = 25.0
COVARIANCE_COEF = 1.0


def dim_contrastive_from_projections(p1: np.ndarray, p2: np.ndarray, variance_target: float):
    """Invariance + variance-hinge + covariance penalty over two views.

    loss = 25 * mean((p1 - p2)^2)
         + 25 * mean over views of sum_d max(0, gamma - std_d)
         +  1 * mean over views of sum of squared off-diagonal covariance / P

    std is the population standard deviation over the batch (no Bessel
    correction); the covariance matrix uses the 1/(B-1) normalization.
    Returns (loss, d_p1, d_p2).
    """
    b, p = p1.shape
    if b < 2:
        raise BatchTooSmall("the variance and covariance terms need at least 2 rows")
    diff = p1 - p2
    inv = float((diff * diff).mean())
    d_inv1 = 2.0 * diff / diff.size
    d_inv2 = -d_inv1

    def _view_terms(z):
        mu = z.mean(axis=0)
        zc = z - mu
        std = np.sqrt((zc * zc).mean(axis=0))
        vterm = float(np.maximum(0.0, variance_target - std).sum())
        active = (std < variance_target) & (std > 0.0)
        d_v = np.where(active, -zc / (b * np.where(std > 0, std, 1.0)), 0.0)
        cov = zc.T @ zc / (b - 1)
        off = cov - np.diag(np.diag(cov))
        cterm = float((off * off).sum() / p)
        d_c = (4.0 / (p * (b - 1))) * zc @ off
        return vterm, d_v, cterm, d_c

    v1t, dv1, c1t, dc1 = _view_terms(p1)
    v2t, dv2, c2t, dc2 = _view_terms(p2)
    var = 0.5 * (v1t + v2t)
    cov = 0.5 * (c1t + c2t)
    loss = INVARIANCE_COEF * inv + VARIANCE_COEF * var + COVARIANCE_COEF * cov
    d_p1 = INVARIANCE_COEF * d_inv1 + VARIANCE_COEF * 0.5 * dv1 + COVARIANCE_COEF * 0.5 * dc1
    d_p2 = INVARIANCE_COEF * d_inv2 + VARIANCE_COEF * 0.5 * dv2 + COVARIANCE_COEF * 0.5 * dc2
    return float(loss), d_p1, d_p2


def dim_contrastive_core(ws, v1, v2, variance_target: float, with_grads: bool = False):
    p1, cache1 = _project(ws, v1)
    p2, cache2 = _project(ws, v2)
    loss, dp1, dp2 = dim_contrastive_from_projections(p1, p2, variance_target)
    if not with_grads:
        return loss, None
    grads: dict[str, np.ndarray] = {}
    _project_backward(ws, cache1, dp1, grads)
    _project_backward(ws, cache2, dp2, grads)
    return loss, grads


def dim_contrastive_loss(
    params, batch, variance_target: float, aug: AugParams, rng: np.random.Generator
) -> float:
    ws = params if isinstance(params, dict) else workspace(params)
    x = np.asarray(batch, dtype=np.float64)
    v1, v2 = draw_views(rng, x, aug)
    loss, _ = dim_contrastive_core(ws, v1, v2, variance_target)
    return loss


# ---------------------------------------------------------------------------
# inter-training

def inter_train(stock: TensorSet, data, cfg: SSLConfig) -> TensorSet:
    """Train the encoder with one self-supervised objective, drop the head.

    The algorithm's head (a linear decoder for masked_recon, the projection
    MLP otherwise) is initialized from cfg.seed, trained jointly, and
    discarded: the output carries exactly the stock's encoder tensor names.
    With zero steps the encoder comes back bit-exact.
    """
    x = np.asarray(data.inputs, dtype=np.float64)
    n = x.shape[0]
    if n < 1:
        raise Unsupported("inter-training data is empty")

    ws = workspace(stock)
    enc_names = encoder_names(stock.names)
    stack = encoder_stack(enc_names)
    embed_dim = stock[stack[-1].bias].shape[0]

    head_seed = hash64(cfg.seed, "head")
    if cfg.algorithm == "masked_recon":
        ws.update(init_decoder_head(embed_dim, x.shape[1], head_seed))
    else:
        ws.update(init_projection_head(embed_dim, head_seed, cfg.proj_hidden, cfg.proj_dim))

    sigma = cfg.aug_noise_sigma
    if sigma is None:
        sigma = 0.1 * float(x.std())
    aug = AugParams(noise_sigma=sigma, mask_frac=cfg.aug_mask_frac)

    if cfg.steps is not None:
        total = cfg.steps
    else:
        total = cfg.epochs * max(1, n // cfg.batch_size)

    state = AdamWState()
    for t in range(total):
        idx = batch_indices(n, cfg.batch_size, t, cfg.seed)
        xb = x[idx]
        rng = make_rng(hash64(cfg.seed, "step", t))
        if cfg.algorithm == "masked_recon":
            mask = draw_recon_mask(rng, xb.shape[0], xb.shape[1], cfg.mask_ratio)
            loss, grads = masked_recon_core(ws, xb, mask, with_grads=True)
        elif cfg.algorithm == "infonce":
            v1, v2 = draw_views(rng, xb, aug)
            loss, grads = infonce_core(ws, v1, v2, cfg.temperature, with_grads=True)
        else:
            v1, v2 = draw_views(rng, xb, aug)
            loss, grads = dim_contrastive_core(ws, v1, v2, cfg.variance_target, with_grads=True)
            if cfg.local_views:
                l1, l2 = draw_local_views(rng, xb, cfg.local_frac)
                l_loss, l_grads = dim_contrastive_core(
                    ws, l1, l2, cfg.variance_target, with_grads=True
                )
                loss += l_loss
                for k, v in l_grads.items():
                    grads[k] = grads.get(k, 0.0) + v
        if not math.isfinite(loss):
            raise Diverged(f"{cfg.algorithm} loss became {loss} at step {t}")
        adamw_step(ws, grads, state, lr_at(t, total, cfg.peak_lr, cfg.warmup_frac), cfg.weight_decay)

    return from_workspace(ws, names=enc_names)
